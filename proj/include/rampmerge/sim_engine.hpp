#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "rampmerge/fuel_model.hpp"
#include "rampmerge/idm.hpp"
#include "rampmerge/lq_tracker.hpp"
#include "rampmerge/merge_coordinator.hpp"
#include "rampmerge/vehicle_model.hpp"

namespace rampmerge {

enum class ControlMode : std::uint8_t { OptimalControl, RampMetering, NoControl };

std::string_view to_string(ControlMode mode);  // optimal | metering | none
ControlMode mode_from_string(std::string_view text);

/// Demand rates in veh/h per lane.
struct DemandPhase {
  double duration = 600.0;  // s
  double mainline_demand = 0.0;
  double ramp_demand = 0.0;
  double q_suggested = 0.0;
};

struct MeteringParams {
  double stop_bar = -60.0;  // m on the merge axis
  double release_range = 100.0;  // m upstream of the bar eligible for a green
};

/// Gap acceptance for uncoordinated merges from the acceleration lane.
struct MergeBehaviour {
  double accept_decel = 2.0;  // both merger and new follower must not need more
  double forced_decel = 4.0;
  double forced_wait = 5.0;   // s at creep speed before a forced merge
  double creep_speed = 2.0;   // m/s
  double forced_zone = 30.0;  // m before the merge-zone end
};

struct ControllerParams {
  int horizon = 300;
  double merge_speed = units::mph_to_mps(73.8);
  double desired_time_headway = 1.2;
  double gap_margin = 5.0;
  int max_ramp_members = 1;
  int max_mainline_members = 12;
  double mainline_buffer_offset = 0.0;
  double hold_distance = 80.0;
  double guard_headway = 0.6;
  double leader_kp = 0.5;
  double repair_growth = 1.5;
  int repair_max_horizon = 1200;
  double activation_margin = 50.0;
  double check_interval = 1.0;
  int max_repairs = 2;
  double density_window = 10.0;
  std::size_t sequence_cap = kDefaultSequenceCap;
  unsigned workers = 1;
};

struct ScenarioConfig {
  std::string name = "scenario";
  MergeGeometry geometry;
  std::vector<DemandPhase> phases;
  ControlMode mode = ControlMode::OptimalControl;
  std::uint64_t seed = 1;
  double dt = 0.1;
  ControlLimits limits;
  WeightConfig weights;
  IdmParams mainline_idm;
  IdmParams ramp_idm;
  FuelCoefficients fuel;
  MeteringParams metering;
  MergeBehaviour merging;
  ControllerParams controller;
  double arrival_headway_floor = 1.0;  // s

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  double duration() const;
  /// Demand phase in force at time t (the last phase past the end).
  const DemandPhase& phase_at(double t) const;
  CoordinatorConfig coordinator_config() const;
};

/// Two 600 s phases with the mainline/ramp demands of scenario 1 or 2. The
/// suggested ramp rate keeps the combined flow at `capacity` veh/h.
ScenarioConfig table1_scenario(int number, double capacity = 1800.0);

/// Arrival times in [t0, t1) for a demand in veh/h: exponential headways
/// shifted by `floor` so the mean rate is preserved and no two arrivals are
/// closer than `floor`. Deterministic in `seed`.
std::vector<double> generate_arrivals(double demand_veh_h, double t0, double t1,
                                      std::uint64_t seed, double floor = 1.0);

struct TrajectoryRow {
  double t = 0.0;
  VehicleId id = 0;
  Lane lane = Lane::Mainline;
  ControlStatus status = ControlStatus::Uncontrolled;
  double position = 0.0;
  double speed = 0.0;
  double accel = 0.0;
  double fuel_rate = 0.0;
};

struct TrajectoryLog {
  double dt = 0.1;
  std::vector<TrajectoryRow> rows;  // step order, then id order
};

struct GroupMetrics {
  double vmt = 0.0;      // vehicle-miles
  double vht = 0.0;      // vehicle-hours
  double q = 0.0;        // mph
  double fuel_ml = 0.0;
  double mpg = 0.0;
  std::size_t vehicles = 0;
};

struct RunMetrics {
  GroupMetrics overall;
  GroupMetrics mainline;  // by origin lane
  GroupMetrics ramp;
};

/// Accumulates rows into metrics. Each row stands for one dt of travel at its
/// speed; vehicles are grouped by the lane of their first row.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(double dt) : dt_(dt) {}
  void add(const TrajectoryRow& row, Lane origin);
  RunMetrics finish() const;

 private:
  struct Sums {
    double distance = 0.0;
    double time = 0.0;
    double fuel = 0.0;
    std::size_t vehicles = 0;
  };
  double dt_;
  Sums main_;
  Sums ramp_;
  std::unordered_set<VehicleId> seen_;
};

RunMetrics compute_metrics(const TrajectoryLog& log);
GroupMetrics finalize_group(double distance_m, double time_s, double fuel_ml,
                            std::size_t vehicles);

struct RunStats {
  std::size_t spawned = 0;
  std::size_t exited = 0;
  std::size_t final_population = 0;
  std::size_t max_entry_queue = 0;
  std::size_t coordinator_commands = 0;  // vehicle-steps steered by the coordinator
  std::size_t triggers = 0;
  std::size_t repairs = 0;
  std::size_t degraded_sets = 0;
  std::size_t forced_merges = 0;
  std::size_t metering_releases = 0;
  double wall_seconds = 0.0;
};

struct RunResult {
  TrajectoryLog log;
  RunMetrics metrics;
  RunStats stats;
  std::vector<double> trigger_crossings;  // times ramp vehicles passed the trigger point
  std::vector<CoordinatorEvent> events;
};

struct RunOptions {
  bool record_log = true;
};

/// Simulates the scenario at fixed dt. Throws CollisionError when any pair of
/// same-lane vehicles reaches a non-positive net gap.
RunResult run(const ScenarioConfig& config, const RunOptions& options = {});

struct InflowWindow {
  double start = 0.0;
  std::size_t count = 0;
  double allowed = 0.0;  // integral of q_suggested over the window, vehicles
  double ratio = 0.0;    // count / allowed
};

/// Worst rolling window of trigger-point crossings against the suggested
/// rate. Windows slide at dt over the run; only full windows are considered.
InflowWindow worst_inflow_window(const std::vector<double>& crossings, const ScenarioConfig& config,
                                 double window = 300.0);

}  // namespace rampmerge
