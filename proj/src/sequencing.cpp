#include "rampmerge/sequencing.hpp"

#include <algorithm>
#include <atomic>
#include <string>
#include <thread>

#include "rampmerge/state_space.hpp"

namespace rampmerge {

std::size_t MergeSequence::first_ramp_index() const {
  const auto it = std::find(lanes.begin(), lanes.end(), Lane::Ramp);
  return static_cast<std::size_t>(it - lanes.begin());
}

std::size_t interleaving_count(std::size_t mainline, std::size_t ramp) {
  std::size_t k = std::min(mainline, ramp);
  std::size_t n = mainline + ramp;
  std::size_t result = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    result = result * (n - k + i) / i;
  }
  return result;
}

namespace {

void interleave(const std::vector<VehicleId>& mainline, const std::vector<VehicleId>& ramp,
                std::size_t im, std::size_t ir, MergeSequence& current,
                std::vector<MergeSequence>& out) {
  if (im == mainline.size() && ir == ramp.size()) {
    out.push_back(current);
    return;
  }
  // Mainline-first branch order keeps the output lexicographic by lane choice.
  if (im < mainline.size()) {
    current.ids.push_back(mainline[im]);
    current.lanes.push_back(Lane::Mainline);
    interleave(mainline, ramp, im + 1, ir, current, out);
    current.ids.pop_back();
    current.lanes.pop_back();
  }
  if (ir < ramp.size()) {
    current.ids.push_back(ramp[ir]);
    current.lanes.push_back(Lane::Ramp);
    interleave(mainline, ramp, im, ir + 1, current, out);
    current.ids.pop_back();
    current.lanes.pop_back();
  }
}

const VehicleState& lookup(const StateMap& states, VehicleId id) {
  const auto it = states.find(id);
  if (it == states.end()) {
    throw std::invalid_argument("no state for vehicle " + std::to_string(id));
  }
  return it->second;
}

}  // namespace

std::vector<MergeSequence> enumerate_sequences(const std::vector<VehicleId>& mainline,
                                               const std::vector<VehicleId>& ramp,
                                               std::size_t cap) {
  const std::size_t count = interleaving_count(mainline.size(), ramp.size());
  if (count > cap) {
    throw EnumerationCapError("merge group of " + std::to_string(mainline.size()) + " mainline and " +
                                  std::to_string(ramp.size()) + " ramp vehicles yields " +
                                  std::to_string(count) + " sequences (cap " +
                                  std::to_string(cap) + "); shrink the buffer",
                              count);
  }
  std::vector<MergeSequence> out;
  out.reserve(count);
  MergeSequence current;
  interleave(mainline, ramp, 0, 0, current, out);
  return out;
}

bool preserves_lane_order(const MergeSequence& seq, const std::vector<VehicleId>& mainline,
                          const std::vector<VehicleId>& ramp) {
  if (seq.ids.size() != mainline.size() + ramp.size() || seq.lanes.size() != seq.ids.size()) {
    return false;
  }
  std::size_t im = 0;
  std::size_t ir = 0;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    if (seq.lanes[i] == Lane::Mainline) {
      if (im >= mainline.size() || mainline[im] != seq.ids[i]) return false;
      ++im;
    } else {
      if (ir >= ramp.size() || ramp[ir] != seq.ids[i]) return false;
      ++ir;
    }
  }
  return true;
}

Eigen::VectorXd build_reference(const MergeSequence& seq, const StateMap& states,
                                const SequencingConfig& config) {
  const int n = static_cast<int>(seq.size());
  Eigen::VectorXd r(2 * n - 1);
  const double headway_gap = config.desired_time_headway * config.merge_speed;
  for (int i = 0; i + 1 < n; ++i) {
    const VehicleState& follower = lookup(states, seq.ids[i + 1]);
    r(i) = std::max(gap_min_for(follower, config.limits) + config.gap_margin, headway_gap) +
           kVehicleLength;
    if (config.keep_wider_gaps) {
      r(i) = std::max(r(i), lookup(states, seq.ids[i]).position - follower.position);
    }
  }
  r.tail(n).setConstant(config.merge_speed);
  return r;
}

std::vector<GapRequirement> gap_requirements(const MergeSequence& seq, const StateMap& states,
                                             const ControlLimits& limits) {
  std::vector<GapRequirement> out;
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    const VehicleState& leader = lookup(states, seq.ids[i]);
    const VehicleState& follower = lookup(states, seq.ids[i + 1]);
    GapRequirement g;
    g.leader = static_cast<int>(i);
    g.cross_lane = seq.lanes[i] != seq.lanes[i + 1];
    g.gap_min = gap_min_for(follower, limits);
    if (!g.cross_lane) {
      const double initial = net_gap(leader.position, follower.position);
      if (initial > 0.0 && initial < g.gap_min) g.gap_min = initial;
    }
    out.push_back(g);
  }
  return out;
}

Eigen::VectorXd initial_state(const MergeSequence& seq, const StateMap& states) {
  const int n = static_cast<int>(seq.size());
  Eigen::VectorXd x(2 * n);
  for (int i = 0; i < n; ++i) {
    const VehicleState& s = lookup(states, seq.ids[static_cast<std::size_t>(i)]);
    x(i) = s.position;
    x(n + i) = s.speed;
  }
  return x;
}

double predicted_fuel(const Rollout& trajectory, double dt, const FuelCoefficients& coeffs) {
  double total = 0.0;
  for (int k = 0; k < trajectory.steps(); ++k) {
    const Eigen::VectorXd& x = trajectory.states[static_cast<std::size_t>(k)];
    const Eigen::VectorXd& u = trajectory.inputs[static_cast<std::size_t>(k)];
    const long n = u.size();
    for (long i = 0; i < n; ++i) {
      // The linear model has no speed floor; fuel is evaluated on the
      // physically meaningful part.
      total += fuel_rate(std::max(0.0, x(n + i)), u(i), coeffs);
    }
  }
  return total * dt;
}

SequenceScore score_sequence(const MergeSequence& seq, const StateMap& states,
                             const SequencingConfig& config) {
  if (seq.ids.empty()) throw std::invalid_argument("score_sequence: empty sequence");
  const LtiModel model = build_model(seq.ids, config.dt);
  const TrackerWeights weights = make_weights(seq.lanes, config.weights);
  const ReferenceTrajectory ref =
      ReferenceTrajectory::constant(build_reference(seq, states, config), config.horizon);
  const auto gaps = gap_requirements(seq, states, config.limits);
  const Eigen::VectorXd x0 = initial_state(seq, states);

  SequenceScore score;
  score.sequence = seq;
  score.prediction =
      solve_with_repair(model, weights, ref, config.horizon, config.limits, gaps, x0, config.repair);
  score.feasible = !score.prediction.degraded;
  score.total_fuel = predicted_fuel(score.prediction.trajectory, config.dt, config.fuel);
  return score;
}

bool better_score(const SequenceScore& a, const SequenceScore& b) {
  if (a.feasible != b.feasible) return a.feasible;
  if (!a.feasible) {
    const auto ca = a.prediction.violations.size();
    const auto cb = b.prediction.violations.size();
    if (ca != cb) return ca < cb;
    const double ma = a.prediction.violations.magnitude();
    const double mb = b.prediction.violations.magnitude();
    if (ma != mb) return ma < mb;
  }
  if (a.total_fuel != b.total_fuel) return a.total_fuel < b.total_fuel;
  const auto ra = a.sequence.first_ramp_index();
  const auto rb = b.sequence.first_ramp_index();
  if (ra != rb) return ra < rb;
  return a.sequence.ids < b.sequence.ids;
}

std::size_t select_best(const std::vector<SequenceScore>& scores) {
  if (scores.empty()) throw std::invalid_argument("select_best: no candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (better_score(scores[i], scores[best])) best = i;
  }
  return best;
}

SequenceScore optimal_sequence(const std::vector<VehicleId>& mainline,
                               const std::vector<VehicleId>& ramp, const StateMap& states,
                               const SequencingConfig& config, unsigned workers,
                               std::vector<SequenceScore>* all_scores) {
  if (mainline.empty() && ramp.empty()) {
    throw std::invalid_argument("optimal_sequence: empty vehicle sets");
  }
  const std::vector<MergeSequence> candidates = enumerate_sequences(mainline, ramp, config.cap);
  std::vector<SequenceScore> scores(candidates.size());

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(candidates.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      scores[i] = score_sequence(candidates[i], states, config);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < candidates.size(); i = next++) {
            scores[i] = score_sequence(candidates[i], states, config);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  const std::size_t best = select_best(scores);
  SequenceScore result = scores[best];
  if (all_scores) *all_scores = std::move(scores);
  return result;
}

}  // namespace rampmerge
