#include "rampmerge/vehicle_model.hpp"

#include <algorithm>
#include <cmath>

namespace rampmerge {

std::string_view to_string(Lane lane) {
  return lane == Lane::Mainline ? "mainline" : "ramp";
}

std::string_view to_string(ControlStatus status) {
  switch (status) {
    case ControlStatus::Uncontrolled: return "uncontrolled";
    case ControlStatus::RampLeaderRegulated: return "leader_regulated";
    case ControlStatus::OptimalControlled: return "optimal";
    case ControlStatus::Merged: return "merged";
  }
  return "unknown";
}

Lane lane_from_string(std::string_view text) {
  if (text == "mainline") return Lane::Mainline;
  if (text == "ramp") return Lane::Ramp;
  throw std::invalid_argument("unknown lane '" + std::string(text) + "'");
}

ControlStatus status_from_string(std::string_view text) {
  if (text == "uncontrolled") return ControlStatus::Uncontrolled;
  if (text == "leader_regulated") return ControlStatus::RampLeaderRegulated;
  if (text == "optimal") return ControlStatus::OptimalControlled;
  if (text == "merged") return ControlStatus::Merged;
  throw std::invalid_argument("unknown status '" + std::string(text) + "'");
}

void MergeGeometry::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("geometry.") + name + " must be > 0");
    }
  };
  positive(ramp_control_zone_len, "ramp_control_zone_len");
  positive(ramp_buffer_zone_len, "ramp_buffer_zone_len");
  positive(mainline_control_zone_len, "mainline_control_zone_len");
  positive(merge_zone_len, "merge_zone_len");
  positive(mainline_upstream_len, "mainline_upstream_len");
  positive(mainline_downstream_len, "mainline_downstream_len");
  positive(ramp_len, "ramp_len");
  if (!(trigger_point < 0.0)) {
    throw std::invalid_argument("geometry.trigger_point must be < 0");
  }
  // The ramp control zone ends at the merge point; its upstream end is the
  // trigger point, and the buffer sits directly upstream of that.
  if (std::abs(trigger_point + ramp_control_zone_len) > 1e-9) {
    throw std::invalid_argument(
        "geometry.trigger_point must equal -ramp_control_zone_len");
  }
  if (ramp_buffer_upstream() < ramp_entry()) {
    throw std::invalid_argument(
        "geometry.ramp_len must cover the ramp control and buffer zones");
  }
  if (mainline_control_zone_len > mainline_upstream_len) {
    throw std::invalid_argument(
        "geometry.mainline_control_zone_len exceeds mainline_upstream_len");
  }
  if (merge_zone_len >= mainline_downstream_len) {
    throw std::invalid_argument(
        "geometry.merge_zone_len must be shorter than mainline_downstream_len");
  }
}

void ControlLimits::validate() const {
  if (!(acc_min < 0.0)) throw std::invalid_argument("limits.acc_min must be < 0");
  if (!(acc_max > 0.0)) throw std::invalid_argument("limits.acc_max must be > 0");
  if (!(gap_min_headway > 0.0)) {
    throw std::invalid_argument("limits.gap_min_headway must be > 0");
  }
}

double ControlLimits::clip(double accel) const {
  return std::clamp(accel, acc_min, acc_max);
}

double map_to_axis(double raw_lane_position, Lane lane, const MergeGeometry& geometry) {
  double offset = 0.0;
  double extent = 0.0;
  if (lane == Lane::Mainline) {
    offset = geometry.mainline_upstream_len;
    extent = geometry.mainline_upstream_len + geometry.mainline_downstream_len;
  } else {
    // The ramp runs on through the acceleration lane alongside the merge zone.
    offset = geometry.ramp_len;
    extent = geometry.ramp_len + geometry.merge_zone_len;
  }
  if (!(raw_lane_position >= 0.0 && raw_lane_position <= extent)) {
    throw OutOfDomainError("lane position " + std::to_string(raw_lane_position) +
                           " outside modeled " + std::string(to_string(lane)) +
                           " segment [0, " + std::to_string(extent) + "]");
  }
  return raw_lane_position - offset;
}

double gap_min_for_speed(double initial_speed, const ControlLimits& limits) {
  if (!(initial_speed > 0.0)) return kGapFloor;
  return std::max(kGapFloor, limits.gap_min_headway * initial_speed);
}

double gap_min_for(const VehicleState& vehicle, const ControlLimits& limits) {
  return gap_min_for_speed(vehicle.initial_speed, limits);
}

Kinematics advance(double position, double speed, double accel, double dt) {
  const double v_next = speed + accel * dt;
  if (v_next >= 0.0) {
    return {position + speed * dt + 0.5 * accel * dt * dt, v_next};
  }
  // Stops within the step.
  return {position + speed * speed / (2.0 * -accel), 0.0};
}

}  // namespace rampmerge
