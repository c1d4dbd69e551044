#pragma once

#include <deque>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "rampmerge/idm.hpp"
#include "rampmerge/lq_tracker.hpp"
#include "rampmerge/sequencing.hpp"
#include "rampmerge/state_space.hpp"
#include "rampmerge/vehicle_model.hpp"

namespace rampmerge {

enum class SetPhase { Forming, Active, Completed };

/// One decision cycle: a group of vehicles steered as a single string until
/// every member has left the merge zone.
struct ControlSet {
  int cycle_id = 0;
  double created_at = 0.0;
  MergeSequence sequence;  // member ids, downstream first
  LtiModel model;
  TrackerWeights weights;
  Eigen::VectorXd reference;
  std::vector<GapRequirement> gaps;
  SteadyTracker tracker;
  SetPhase phase = SetPhase::Forming;
  std::vector<bool> departed;
  bool degraded = false;  // chosen sequence failed its constraint check
  int repairs = 0;
  double next_check = 0.0;

  bool contains(VehicleId id) const;
  std::size_t mainline_count() const;
  std::size_t ramp_count() const;
};

struct InflowState {
  double q_suggested = 0.0;  // veh/s, rate in force at the last trigger
  int n_ramp_prev = 0;
  double t_last_cycle = 0.0;
  bool has_cycle = false;
};

/// Ramp leader: the first uncontrolled ramp vehicle behind the last
/// controlled one (or the downstream-most ramp vehicle when none is
/// controlled) that has not yet crossed the trigger point. `ramp` is ordered
/// downstream first.
std::optional<VehicleId> find_ramp_leader(const std::vector<VehicleState>& ramp,
                                          const std::unordered_set<VehicleId>& controlled,
                                          double trigger_point);

/// Mainline buffer length holding n * q_main / q_suggested vehicles at
/// density d_main, clamped to [50 m, mainline control zone]. Rates in veh/s,
/// density in veh/m.
double mainline_buffer_length(double q_main, double q_suggested, int n, double d_main,
                              const MergeGeometry& geometry);

/// Seconds after the previous trigger before which the next ramp leader
/// should not reach the trigger point.
double proper_arrival_time(int n_ramp_prev, double q_suggested);

struct CoordinatorConfig {
  SequencingConfig sequencing;
  IdmParams ramp_idm;            // used for leader ETA prediction
  IdmParams guard;               // interaction-only safety bound on commands
  LeaderRegulationGains leader_gains;
  int max_ramp_members = 1;
  int max_mainline_members = 12;
  double mainline_buffer_offset = 0.0;  // m from merge-zone entry to the buffer's downstream end
  double hold_distance = 80.0;  // m upstream of the trigger where an early leader waits
  double check_interval = 1.0;  // s between constraint re-checks of a set
  int max_repairs = 2;
  double density_window = 10.0;  // s
  unsigned workers = 1;

  CoordinatorConfig();
};

/// World view handed to the coordinator once per step. Both lanes are ordered
/// downstream first; demand figures are in veh/s.
struct TrafficSnapshot {
  double time = 0.0;
  double dt = 0.1;
  std::vector<VehicleState> mainline;
  std::vector<VehicleState> ramp;
  double q_main = 0.0;
  double q_suggested = 0.0;
};

struct Command {
  VehicleId id = 0;
  double accel = 0.0;
  ControlStatus status = ControlStatus::Uncontrolled;
};

struct CoordinatorEvent {
  double time = 0.0;
  std::string kind;  // trigger, repair, degraded, cap_shrink, complete
  int cycle_id = 0;
  std::string detail;
};

class MergeCoordinator {
 public:
  MergeCoordinator(MergeGeometry geometry, CoordinatorConfig config);

  /// Enrolls a new control set for a leader that crossed the trigger point.
  const ControlSet& on_trigger(VehicleId leader, const TrafficSnapshot& world);

  /// Detects trigger crossings, advances set lifecycles and returns the
  /// commands for every vehicle the coordinator steers this step.
  /// `nominal` holds each vehicle's uncontrolled (IDM) acceleration.
  std::vector<Command> step_control(const TrafficSnapshot& world,
                                    const std::unordered_map<VehicleId, double>& nominal);

  const std::vector<ControlSet>& active_sets() const { return sets_; }
  const InflowState& inflow() const { return inflow_; }
  const std::vector<CoordinatorEvent>& events() const { return events_; }
  const std::vector<double>& trigger_times() const { return trigger_times_; }
  bool ever_controlled(VehicleId id) const { return controlled_.count(id) > 0; }
  double mainline_density() const;

 private:
  void observe_density(const TrafficSnapshot& world);
  void check_and_repair(ControlSet& set, const Eigen::VectorXd& x, double now);
  Eigen::VectorXd member_state(ControlSet& set, const std::unordered_map<VehicleId, VehicleState>& by_id,
                               double dt);
  // Free-flow time from standstill at `from` to the trigger.
  double launch_time(double from, double dt) const;
  const ConvergedGains& gains_for(const MergeSequence& seq, const LtiModel& model,
                                  const TrackerWeights& weights);

  MergeGeometry geometry_;
  CoordinatorConfig config_;
  std::vector<ControlSet> sets_;
  InflowState inflow_;
  std::unordered_set<VehicleId> controlled_;
  std::unordered_map<VehicleId, VehicleState> last_seen_;
  std::unordered_map<VehicleId, double> enrolled_speed_;
  std::deque<std::pair<double, double>> density_samples_;
  double density_sum_ = 0.0;
  std::vector<CoordinatorEvent> events_;
  std::vector<double> trigger_times_;
  std::unordered_map<std::string, ConvergedGains> gain_cache_;
  int next_cycle_ = 1;

};

}  // namespace rampmerge
