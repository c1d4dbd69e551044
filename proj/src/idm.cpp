#include "rampmerge/idm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rampmerge {

void IdmParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("idm.") + name + " must be > 0");
    }
  };
  positive(v0, "v0");
  positive(s0, "s0");
  positive(T, "T");
  positive(a, "a");
  positive(b, "b");
  if (!(delta >= 1.0)) throw std::invalid_argument("idm.delta must be >= 1");
}

double idm_desired_gap(double speed, double closing_speed, const IdmParams& p) {
  const double s_star = p.s0 + speed * p.T + speed * closing_speed / (2.0 * std::sqrt(p.a * p.b));
  return std::max(p.s0, s_star);
}

double idm_interaction_accel(double speed, double gap, double closing_speed, const IdmParams& p) {
  if (!(gap > 0.0)) {
    throw CollisionError("IDM gap " + std::to_string(gap) + " <= 0", 0, 0);
  }
  if (std::isinf(gap)) return p.a;
  const double ratio = idm_desired_gap(speed, closing_speed, p) / gap;
  return p.a * (1.0 - ratio * ratio);
}

double idm_accel(double speed, double gap, double closing_speed, const IdmParams& p) {
  const double free_term = std::pow(std::max(speed, 0.0) / p.v0, p.delta);
  if (!(gap > 0.0)) {
    throw CollisionError("IDM gap " + std::to_string(gap) + " <= 0", 0, 0);
  }
  if (std::isinf(gap)) return p.a * (1.0 - free_term);
  const double ratio = idm_desired_gap(speed, closing_speed, p) / gap;
  return p.a * (1.0 - free_term - ratio * ratio);
}

double idm_equilibrium_gap(double speed, const IdmParams& p) {
  const double free_term = std::pow(std::max(speed, 0.0) / p.v0, p.delta);
  if (free_term >= 1.0) return kFreeRoad;
  return (p.s0 + speed * p.T) / std::sqrt(1.0 - free_term);
}

Kinematics PredecessorTrack::at(int step, double dt) const {
  if (samples.empty()) throw std::invalid_argument("PredecessorTrack: no samples");
  const auto last = static_cast<int>(samples.size()) - 1;
  if (step <= last) return samples[static_cast<std::size_t>(step)];
  const Kinematics& end = samples.back();
  return {end.position + end.speed * dt * (step - last), end.speed};
}

double predict_eta(const VehicleState& leader, const std::optional<PredecessorTrack>& predecessor,
                   double trigger_point, const IdmParams& params, double dt, double horizon) {
  if (!(dt > 0.0)) throw std::invalid_argument("predict_eta: dt must be > 0");
  if (leader.position >= trigger_point) return 0.0;

  double p = leader.position;
  double v = leader.speed;
  const int max_steps = static_cast<int>(std::ceil(horizon / dt));
  for (int k = 0; k < max_steps; ++k) {
    double gap = kFreeRoad;
    double closing = 0.0;
    if (predecessor) {
      const Kinematics lead = predecessor->at(k, dt);
      gap = net_gap(lead.position, p);
      closing = v - lead.speed;
      // The prediction only needs a plausible profile; a predicted overlap
      // means the leader waits behind its predecessor.
      gap = std::max(gap, 1e-3);
    }
    const double acc = idm_accel(v, gap, closing, params);
    const Kinematics next = advance(p, v, acc, dt);
    if (next.position >= trigger_point) {
      const double travelled = next.position - p;
      const double fraction = travelled > 0.0 ? (trigger_point - p) / travelled : 1.0;
      return (k + fraction) * dt;
    }
    p = next.position;
    v = next.speed;
  }
  return kNoArrival;
}

LeaderCommand regulate_leader(const VehicleState& leader, double trigger_point, double target_time,
                              double current_eta, double idm_accel_value,
                              const ControlLimits& limits, const LeaderRegulationGains& gains) {
  if (!(target_time > 0.0) || current_eta >= target_time || leader.position >= trigger_point) {
    return {idm_accel_value, false};
  }
  const double remaining = trigger_point - leader.position;
  const double v_target = remaining / target_time;
  double command = limits.clip(gains.kp * (v_target - leader.speed));
  command = std::min(command, idm_accel_value);
  return {command, true};
}

}  // namespace rampmerge
