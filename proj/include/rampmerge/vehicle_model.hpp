#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rampmerge {

// Unit conversions. Everything inside the library is SI.
namespace units {
inline constexpr double kMetersPerMile = 1609.344;
inline constexpr double kMetersPerFoot = 0.3048;
inline constexpr double kMillilitersPerGallon = 3785.411784;
inline constexpr double kSecondsPerHour = 3600.0;

constexpr double mph_to_mps(double mph) { return mph * kMetersPerMile / kSecondsPerHour; }
constexpr double mps_to_mph(double mps) { return mps * kSecondsPerHour / kMetersPerMile; }
constexpr double ftps2_to_mps2(double ftps2) { return ftps2 * kMetersPerFoot; }
constexpr double per_hour_to_per_second(double per_hour) { return per_hour / kSecondsPerHour; }
constexpr double per_second_to_per_hour(double per_second) { return per_second * kSecondsPerHour; }
}  // namespace units

/// Bumper-to-bumper length used for net gaps and occupancy.
inline constexpr double kVehicleLength = 5.0;

/// Minimum net gap licensed for a vehicle whose recorded initial speed is zero.
inline constexpr double kGapFloor = 5.0;

enum class Lane : std::uint8_t { Mainline, Ramp };

enum class ControlStatus : std::uint8_t {
  Uncontrolled,
  RampLeaderRegulated,
  OptimalControlled,
  Merged,
};

std::string_view to_string(Lane lane);
std::string_view to_string(ControlStatus status);
Lane lane_from_string(std::string_view text);
ControlStatus status_from_string(std::string_view text);

using VehicleId = std::int64_t;

/// Kinematic state of one vehicle on the merge axis. The merge point is the
/// origin; upstream positions are negative on both lanes.
struct VehicleState {
  VehicleId id = 0;
  Lane lane = Lane::Mainline;
  double position = 0.0;  // m
  double speed = 0.0;     // m/s
  double accel = 0.0;     // m/s^2
  ControlStatus status = ControlStatus::Uncontrolled;
  double initial_speed = 0.0;  // v_i0, recorded at buffer-zone entry
};

/// Zone layout around one on-ramp. Lengths in meters; the trigger point is the
/// downstream boundary of the ramp buffer zone and equals the upstream end of
/// the ramp control zone.
struct MergeGeometry {
  double ramp_control_zone_len = 200.0;
  double ramp_buffer_zone_len = 150.0;
  double mainline_control_zone_len = 800.0;
  double merge_zone_len = 150.0;
  double trigger_point = -200.0;

  // Simulated network extent.
  double mainline_upstream_len = 2000.0;
  double mainline_downstream_len = 500.0;
  double ramp_len = 700.0;  // from ramp entry to merge point

  double merge_zone_entry() const { return 0.0; }
  double merge_zone_end() const { return merge_zone_len; }
  double ramp_buffer_upstream() const { return trigger_point - ramp_buffer_zone_len; }
  double ramp_entry() const { return -ramp_len; }
  double mainline_entry() const { return -mainline_upstream_len; }
  double network_exit() const { return mainline_downstream_len; }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct ControlLimits {
  double acc_min = units::ftps2_to_mps2(-9.8);
  double acc_max = units::ftps2_to_mps2(8.2);
  double gap_min_headway = 2.0;  // s

  void validate() const;
  double clip(double accel) const;
};

class OutOfDomainError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Distance along the lane measured from the lane's own upstream entry.
/// Returns the merge-axis coordinate, preserving distance-to-merge per lane.
double map_to_axis(double raw_lane_position, Lane lane, const MergeGeometry& geometry);

/// Hard minimum net gap the vehicle must keep to its predecessor.
double gap_min_for(const VehicleState& vehicle, const ControlLimits& limits);
double gap_min_for_speed(double initial_speed, const ControlLimits& limits);

/// Net gap between a leader and its follower.
inline double net_gap(double leader_position, double follower_position) {
  return leader_position - follower_position - kVehicleLength;
}

/// Raised when two same-lane vehicles reach a net gap of zero or less.
class CollisionError : public std::runtime_error {
 public:
  CollisionError(const std::string& what, VehicleId leader, VehicleId follower)
      : std::runtime_error(what), leader_(leader), follower_(follower) {}
  VehicleId leader() const { return leader_; }
  VehicleId follower() const { return follower_; }

 private:
  VehicleId leader_;
  VehicleId follower_;
};

/// Constant-acceleration update over dt with the speed floored at zero. A
/// vehicle that would reverse stops where its speed reaches zero.
struct Kinematics {
  double position;
  double speed;
};
Kinematics advance(double position, double speed, double accel, double dt);

}  // namespace rampmerge
