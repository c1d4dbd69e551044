#pragma once

#include <stdexcept>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "rampmerge/fuel_model.hpp"
#include "rampmerge/lq_tracker.hpp"
#include "rampmerge/vehicle_model.hpp"

namespace rampmerge {

/// Post-merge order of a control group, downstream vehicle first.
struct MergeSequence {
  std::vector<VehicleId> ids;
  std::vector<Lane> lanes;

  std::size_t size() const { return ids.size(); }
  bool operator==(const MergeSequence&) const = default;
  /// Index of the first ramp vehicle, or size() when there is none.
  std::size_t first_ramp_index() const;
};

class EnumerationCapError : public std::length_error {
 public:
  EnumerationCapError(const std::string& what, std::size_t count)
      : std::length_error(what), count_(count) {}
  std::size_t count() const { return count_; }

 private:
  std::size_t count_;
};

inline constexpr std::size_t kDefaultSequenceCap = 252;

/// C(m + r, r) without overflow for the sizes used here.
std::size_t interleaving_count(std::size_t mainline, std::size_t ramp);

/// All interleavings of the two lane orders. Throws EnumerationCapError when
/// the count exceeds `cap`.
std::vector<MergeSequence> enumerate_sequences(const std::vector<VehicleId>& mainline,
                                               const std::vector<VehicleId>& ramp,
                                               std::size_t cap = kDefaultSequenceCap);

/// True when restricting `seq` to either lane reproduces that lane's order.
bool preserves_lane_order(const MergeSequence& seq, const std::vector<VehicleId>& mainline,
                          const std::vector<VehicleId>& ramp);

using StateMap = std::unordered_map<VehicleId, VehicleState>;

struct SequencingConfig {
  double dt = 0.1;
  int horizon = 300;
  double merge_speed = units::mph_to_mps(73.8);
  double desired_time_headway = 1.2;
  double gap_margin = 5.0;  // m of slack above Gap_min in the gap reference
  bool keep_wider_gaps = true;  // never ask a pair to close in from its initial gap
  ControlLimits limits;
  WeightConfig weights;
  RepairOptions repair;
  FuelCoefficients fuel;
  std::size_t cap = kDefaultSequenceCap;
};

/// Constant output reference: front-to-front gaps of
/// max(Gap_min(follower) + gap_margin, headway * merge_speed) + vehicle
/// length, then merge_speed for every vehicle. With keep_wider_gaps a pair
/// that starts further apart keeps its initial gap as the target.
Eigen::VectorXd build_reference(const MergeSequence& seq, const StateMap& states,
                                const SequencingConfig& config);

/// Gap floor for each neighbour pair. A same-lane pair that already starts
/// closer than Gap_min (but not overlapping) must not close in further.
std::vector<GapRequirement> gap_requirements(const MergeSequence& seq, const StateMap& states,
                                             const ControlLimits& limits);

Eigen::VectorXd initial_state(const MergeSequence& seq, const StateMap& states);

struct SequenceScore {
  MergeSequence sequence;
  double total_fuel = 0.0;  // mL over the predicted horizon
  RepairedSolution prediction;
  bool feasible = false;
};

/// Predicted fuel of all members: sum over vehicles and steps of
/// fuel_rate(v, u) * dt along the clipped rollout.
double predicted_fuel(const Rollout& trajectory, double dt, const FuelCoefficients& coeffs);

SequenceScore score_sequence(const MergeSequence& seq, const StateMap& states,
                             const SequencingConfig& config);

/// Total order used to pick a winner: feasible before infeasible; feasible
/// by fuel, infeasible by violation count then magnitude then fuel; ties go
/// to the earliest ramp insertion, then lexicographic id order.
bool better_score(const SequenceScore& a, const SequenceScore& b);

std::size_t select_best(const std::vector<SequenceScore>& scores);

/// Scores every candidate (concurrently when `workers` > 1) and returns the
/// best by better_score. Throws std::invalid_argument for an empty group.
SequenceScore optimal_sequence(const std::vector<VehicleId>& mainline,
                               const std::vector<VehicleId>& ramp, const StateMap& states,
                               const SequencingConfig& config, unsigned workers = 0,
                               std::vector<SequenceScore>* all_scores = nullptr);

}  // namespace rampmerge
