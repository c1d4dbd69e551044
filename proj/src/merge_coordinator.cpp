#include "rampmerge/merge_coordinator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rampmerge {

bool ControlSet::contains(VehicleId id) const {
  return std::find(sequence.ids.begin(), sequence.ids.end(), id) != sequence.ids.end();
}

std::size_t ControlSet::mainline_count() const {
  return static_cast<std::size_t>(
      std::count(sequence.lanes.begin(), sequence.lanes.end(), Lane::Mainline));
}

std::size_t ControlSet::ramp_count() const { return sequence.size() - mainline_count(); }

std::optional<VehicleId> find_ramp_leader(const std::vector<VehicleState>& ramp,
                                          const std::unordered_set<VehicleId>& controlled,
                                          double trigger_point) {
  std::size_t start = 0;
  for (std::size_t i = 0; i < ramp.size(); ++i) {
    if (controlled.count(ramp[i].id)) start = i + 1;
  }
  for (std::size_t i = start; i < ramp.size(); ++i) {
    if (ramp[i].position < trigger_point && !controlled.count(ramp[i].id)) return ramp[i].id;
  }
  return std::nullopt;
}

double mainline_buffer_length(double q_main, double q_suggested, int n, double d_main,
                              const MergeGeometry& geometry) {
  constexpr double kMinLength = 50.0;
  const double upper = geometry.mainline_control_zone_len;
  if (!(d_main > 0.0) || !(q_suggested > 0.0)) return upper;
  const double vehicles = static_cast<double>(n) * q_main / q_suggested;
  return std::clamp(vehicles / d_main, kMinLength, upper);
}

double proper_arrival_time(int n_ramp_prev, double q_suggested) {
  if (!(q_suggested > 0.0)) throw std::invalid_argument("q_suggested must be > 0");
  return static_cast<double>(n_ramp_prev) / q_suggested;
}

CoordinatorConfig::CoordinatorConfig() {
  ramp_idm.v0 = units::mph_to_mps(33.5);
  guard.T = 0.6;
  guard.a = sequencing.limits.acc_max;
}

MergeCoordinator::MergeCoordinator(MergeGeometry geometry, CoordinatorConfig config)
    : geometry_(geometry), config_(std::move(config)) {
  geometry_.validate();
  config_.sequencing.limits.validate();
}

double MergeCoordinator::mainline_density() const {
  if (density_samples_.empty()) return 0.0;
  return density_sum_ / static_cast<double>(density_samples_.size());
}

void MergeCoordinator::observe_density(const TrafficSnapshot& world) {
  const double lo = geometry_.merge_zone_entry() - geometry_.mainline_control_zone_len;
  const auto count = std::count_if(world.mainline.begin(), world.mainline.end(), [&](const auto& v) {
    return v.position >= lo && v.position < geometry_.merge_zone_entry();
  });
  const double d = static_cast<double>(count) / geometry_.mainline_control_zone_len;
  density_samples_.emplace_back(world.time, d);
  density_sum_ += d;
  while (!density_samples_.empty() &&
         density_samples_.front().first <= world.time - config_.density_window) {
    density_sum_ -= density_samples_.front().second;
    density_samples_.pop_front();
  }
}

double MergeCoordinator::launch_time(double from, double dt) const {
  VehicleState start;
  start.position = std::min(from, geometry_.trigger_point);
  return predict_eta(start, std::nullopt, geometry_.trigger_point, config_.ramp_idm, dt);
}

const ConvergedGains& MergeCoordinator::gains_for(const MergeSequence& seq, const LtiModel& model,
                                                  const TrackerWeights& weights) {
  std::string key;
  for (Lane l : seq.lanes) key.push_back(l == Lane::Ramp ? 'r' : 'm');
  auto it = gain_cache_.find(key);
  if (it == gain_cache_.end()) {
    it = gain_cache_.emplace(key, converged_gains(model, weights)).first;
  }
  return it->second;
}

const ControlSet& MergeCoordinator::on_trigger(VehicleId leader, const TrafficSnapshot& world) {
  const SequencingConfig& scfg = config_.sequencing;
  const auto lead_it = std::find_if(world.ramp.begin(), world.ramp.end(),
                                    [&](const VehicleState& v) { return v.id == leader; });
  if (lead_it == world.ramp.end()) throw std::invalid_argument("on_trigger: leader not on ramp");

  std::vector<VehicleId> ramp_ids{leader};
  for (auto it = lead_it + 1; it != world.ramp.end(); ++it) {
    if (static_cast<int>(ramp_ids.size()) >= config_.max_ramp_members) break;
    if (it->position < geometry_.ramp_buffer_upstream() || controlled_.count(it->id)) break;
    ramp_ids.push_back(it->id);
  }

  std::vector<VehicleId> main_ids;
  const double length = mainline_buffer_length(world.q_main, world.q_suggested,
                                                static_cast<int>(ramp_ids.size()),
                                                mainline_density(), geometry_);
  const double buffer_end = geometry_.merge_zone_entry() - config_.mainline_buffer_offset;
  const double buffer_start = buffer_end - length;
  for (const VehicleState& v : world.mainline) {
    if (v.position >= buffer_end || controlled_.count(v.id)) continue;
    if (v.position < buffer_start) break;
    if (static_cast<int>(main_ids.size()) >= config_.max_mainline_members) break;
    main_ids.push_back(v.id);
  }

  const int cycle = next_cycle_++;
  while (interleaving_count(main_ids.size(), ramp_ids.size()) > scfg.cap) {
    if (ramp_ids.size() > 1) {
      ramp_ids.pop_back();
    } else {
      main_ids.pop_back();
    }
    events_.push_back({world.time, "cap_shrink", cycle,
                       std::to_string(main_ids.size()) + "+" + std::to_string(ramp_ids.size())});
  }

  StateMap states;
  auto enroll = [&](const VehicleState& v) {
    VehicleState s = v;
    s.initial_speed = v.speed;
    enrolled_speed_[v.id] = v.speed;
    states[v.id] = s;
  };
  for (const VehicleState& v : world.mainline) {
    if (std::find(main_ids.begin(), main_ids.end(), v.id) != main_ids.end()) enroll(v);
  }
  for (const VehicleState& v : world.ramp) {
    if (std::find(ramp_ids.begin(), ramp_ids.end(), v.id) != ramp_ids.end()) enroll(v);
  }

  SequencingConfig seq_cfg = scfg;
  seq_cfg.dt = world.dt;
  const SequenceScore best =
      optimal_sequence(main_ids, ramp_ids, states, seq_cfg, config_.workers);

  ControlSet set;
  set.cycle_id = cycle;
  set.created_at = world.time;
  set.sequence = best.sequence;
  set.model = build_model(set.sequence.ids, world.dt);
  set.weights = make_weights(set.sequence.lanes, scfg.weights);
  set.reference = build_reference(set.sequence, states, seq_cfg);
  set.gaps = gap_requirements(set.sequence, states, scfg.limits);
  const ConvergedGains& gains = gains_for(set.sequence, set.model, set.weights);
  set.tracker = {gains.K, gains.Ky,
                 steady_feedforward(set.model, set.weights, gains, set.reference)};
  set.phase = SetPhase::Active;
  set.departed.assign(set.sequence.size(), false);
  set.degraded = !best.feasible;
  set.next_check = world.time + config_.check_interval;

  for (VehicleId id : set.sequence.ids) {
    controlled_.insert(id);
    last_seen_[id] = states.at(id);
  }
  inflow_.q_suggested = world.q_suggested;
  inflow_.n_ramp_prev = static_cast<int>(ramp_ids.size());
  inflow_.t_last_cycle = world.time;
  inflow_.has_cycle = true;
  trigger_times_.push_back(world.time);

  std::string detail;
  for (std::size_t i = 0; i < set.sequence.size(); ++i) {
    if (i) detail += ' ';
    detail += (set.sequence.lanes[i] == Lane::Ramp ? "r" : "m") + std::to_string(set.sequence.ids[i]);
  }
  events_.push_back({world.time, "trigger", cycle, detail});
  if (set.degraded) {
    events_.push_back({world.time, "degraded", cycle,
                       std::to_string(best.prediction.violations.size()) + " violations"});
  }
  sets_.push_back(std::move(set));
  return sets_.back();
}

Eigen::VectorXd MergeCoordinator::member_state(
    ControlSet& set, const std::unordered_map<VehicleId, VehicleState>& by_id, double dt) {
  const int n = static_cast<int>(set.sequence.size());
  Eigen::VectorXd x(2 * n);
  for (int i = 0; i < n; ++i) {
    const VehicleId id = set.sequence.ids[static_cast<std::size_t>(i)];
    VehicleState& seen = last_seen_[id];
    const auto it = by_id.find(id);
    if (it != by_id.end()) {
      seen = it->second;
    } else {
      // Left the network: carried forward at constant speed.
      seen.position += seen.speed * dt;
    }
    x(i) = seen.position;
    x(n + i) = seen.speed;
  }
  return x;
}

void MergeCoordinator::check_and_repair(ControlSet& set, const Eigen::VectorXd& x0, double now) {
  const SequencingConfig& scfg = config_.sequencing;
  const LtiModel& m = set.model;
  Rollout pred;
  Eigen::VectorXd x = x0;
  pred.states.push_back(x);
  for (int k = 0; k < scfg.horizon; ++k) {
    Eigen::VectorXd u = set.tracker.control(x).cwiseMax(scfg.limits.acc_min).cwiseMin(scfg.limits.acc_max);
    x = m.A * x + m.B * u;
    pred.inputs.push_back(std::move(u));
    pred.states.push_back(x);
  }
  const ViolationReport report =
      check_constraints(pred, scfg.limits, set.gaps, scfg.repair.constraints);
  if (report.empty() || set.repairs >= config_.max_repairs) return;

  const auto ref = ReferenceTrajectory::constant(set.reference, scfg.horizon);
  const RepairedSolution fix = solve_with_repair(m, set.weights, ref, scfg.horizon, scfg.limits,
                                                 set.gaps, x0, scfg.repair);
  set.tracker = first_step_tracker(fix.solution);
  ++set.repairs;
  events_.push_back({now, "repair", set.cycle_id,
                     "N=" + std::to_string(fix.horizon_used) +
                         (fix.degraded ? " degraded" : "")});
}

std::vector<Command> MergeCoordinator::step_control(
    const TrafficSnapshot& world, const std::unordered_map<VehicleId, double>& nominal) {
  observe_density(world);

  // Trigger crossings, downstream first.
  for (const VehicleState& v : world.ramp) {
    if (v.position >= geometry_.trigger_point && v.position < geometry_.merge_zone_end() &&
        !controlled_.count(v.id)) {
      on_trigger(v.id, world);
    }
  }

  std::unordered_map<VehicleId, VehicleState> by_id;
  for (const auto& v : world.mainline) by_id[v.id] = v;
  for (const auto& v : world.ramp) by_id[v.id] = v;

  // Physical predecessor in the same lane, or the merge-zone end for ramp
  // vehicles.
  auto guard_accel = [&](const VehicleState& v) {
    const auto& lane = v.lane == Lane::Ramp ? world.ramp : world.mainline;
    double bound = kFreeRoad;
    const VehicleState* ahead = nullptr;
    for (const auto& other : lane) {
      if (other.position > v.position) ahead = &other;
    }
    if (ahead) {
      bound = idm_accel(v.speed, net_gap(ahead->position, v.position), v.speed - ahead->speed,
                        config_.guard);
    } else {
      bound = idm_accel(v.speed, kFreeRoad, 0.0, config_.guard);
    }
    if (v.lane == Lane::Ramp) {
      const double gap = geometry_.merge_zone_end() - v.position;
      if (gap > 0.0) {
        bound = std::min(bound, idm_interaction_accel(v.speed, gap, v.speed, config_.guard));
      }
    }
    return bound;
  };

  std::vector<Command> commands;
  const ControlLimits& limits = config_.sequencing.limits;
  for (ControlSet& set : sets_) {
    const Eigen::VectorXd x = member_state(set, by_id, world.dt);
    if (world.time + 1e-9 >= set.next_check) {
      check_and_repair(set, x, world.time);
      set.next_check += config_.check_interval;
    }
    const Eigen::VectorXd u = set.tracker.control(x);
    bool all_departed = true;
    for (std::size_t i = 0; i < set.sequence.size(); ++i) {
      if (!set.departed[i] && x(static_cast<long>(i)) >= geometry_.merge_zone_end()) {
        set.departed[i] = true;
      }
      if (set.departed[i]) continue;
      all_departed = false;
      const auto it = by_id.find(set.sequence.ids[i]);
      if (it == by_id.end()) continue;
      const double cmd = std::min(limits.clip(u(static_cast<long>(i))), guard_accel(it->second));
      commands.push_back({it->first, cmd, ControlStatus::OptimalControlled});
    }
    if (all_departed) {
      set.phase = SetPhase::Completed;
      events_.push_back({world.time, "complete", set.cycle_id, ""});
    }
  }
  std::erase_if(sets_, [](const ControlSet& s) { return s.phase == SetPhase::Completed; });
  for (auto it = last_seen_.begin(); it != last_seen_.end();) {
    const bool live = std::any_of(sets_.begin(), sets_.end(),
                                  [&](const ControlSet& s) { return s.contains(it->first); });
    it = live ? std::next(it) : last_seen_.erase(it);
  }

  // Arrival regulation of the next ramp leader.
  if (inflow_.has_cycle) {
    const auto leader = find_ramp_leader(world.ramp, controlled_, geometry_.trigger_point);
    if (leader) {
      const double remaining = inflow_.t_last_cycle +
                               proper_arrival_time(inflow_.n_ramp_prev, inflow_.q_suggested) -
                               world.time;
      if (remaining > 0.0) {
        const auto pos = std::find_if(world.ramp.begin(), world.ramp.end(),
                                      [&](const VehicleState& v) { return v.id == *leader; });
        std::vector<Kinematics> pred_samples;
        std::optional<PredecessorTrack> predecessor;
        if (pos != world.ramp.begin()) {
          const VehicleState& p = *(pos - 1);
          pred_samples.push_back({p.position, p.speed});
          predecessor = PredecessorTrack{pred_samples};
        }
        const auto nominal_it = nominal.find(*leader);
        const double idm = nominal_it != nominal.end() ? nominal_it->second : 0.0;
        // Early leaders wait at the hold point and launch from there in time
        // to reach the trigger on schedule.
        const double hold = geometry_.trigger_point - config_.hold_distance;
        const double early = remaining - launch_time(hold, world.dt);
        LeaderCommand cmd;
        if (config_.hold_distance > 0.0 && early > 0.0) {
          if (pos->position < hold) {
            const double eta =
                predict_eta(*pos, predecessor, hold, config_.ramp_idm, world.dt, early + 1.0);
            cmd = regulate_leader(*pos, hold, early, eta, idm, limits, config_.leader_gains);
          } else {
            cmd = {std::min(idm, std::max(limits.acc_min, -pos->speed)), true};
          }
        } else {
          const double eta = predict_eta(*pos, predecessor, geometry_.trigger_point,
                                         config_.ramp_idm, world.dt, remaining + 1.0);
          cmd = regulate_leader(*pos, geometry_.trigger_point, remaining, eta, idm, limits,
                                config_.leader_gains);
        }
        if (cmd.regulated) {
          commands.push_back({*leader, cmd.accel, ControlStatus::RampLeaderRegulated});
        }
      }
      // Everyone queued behind the leader stops at the hold point.
      if (config_.hold_distance > 0.0) {
        const double hold = geometry_.trigger_point - config_.hold_distance;
        bool behind = false;
        for (const VehicleState& v : world.ramp) {
          if (v.id == *leader) {
            behind = true;
            continue;
          }
          if (!behind || controlled_.count(v.id) || v.position >= hold) continue;
          const auto nominal_it = nominal.find(v.id);
          const double idm = nominal_it != nominal.end() ? nominal_it->second : 0.0;
          const double stop = idm_accel(v.speed, hold - v.position, v.speed, config_.ramp_idm);
          if (stop < idm) {
            commands.push_back({v.id, std::max(stop, limits.acc_min), ControlStatus::Uncontrolled});
          }
        }
      }
    }
  }
  return commands;
}

}  // namespace rampmerge
