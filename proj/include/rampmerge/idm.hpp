#pragma once

#include <limits>
#include <optional>
#include <span>

#include "rampmerge/vehicle_model.hpp"

namespace rampmerge {

inline constexpr double kFreeRoad = std::numeric_limits<double>::infinity();

struct IdmParams {
  double v0 = units::mph_to_mps(73.8);  // desired speed, m/s
  double s0 = 2.0;                      // minimum spacing, m
  double T = 1.5;                       // desired time headway, s
  double a = 1.4;                       // maximum acceleration, m/s^2
  double b = 2.0;                       // comfortable deceleration, m/s^2
  double delta = 4.0;                   // acceleration exponent

  void validate() const;
};

/// Desired dynamic gap s*(v, dv), floored at s0. `dv` is the closing speed
/// v - v_leader.
double idm_desired_gap(double speed, double closing_speed, const IdmParams& p);

/// IDM acceleration. Pass kFreeRoad as the gap when there is no leader.
/// Throws CollisionError when gap <= 0.
double idm_accel(double speed, double gap, double closing_speed, const IdmParams& p);

/// Interaction term only, a * (1 - (s*/s)^2); used as a braking guard for
/// vehicles whose free-road behaviour comes from elsewhere.
double idm_interaction_accel(double speed, double gap, double closing_speed, const IdmParams& p);

/// Steady-state net gap at speed v (dv = 0, zero acceleration). Infinite at
/// v >= v0.
double idm_equilibrium_gap(double speed, const IdmParams& p);

/// Sampled motion of a predecessor: entry k is the state k steps from now.
/// Beyond the last entry the predecessor keeps its final speed.
struct PredecessorTrack {
  std::span<const Kinematics> samples;

  Kinematics at(int step, double dt) const;
};

inline constexpr double kNoArrival = std::numeric_limits<double>::infinity();

/// Forward-integrates the leader under IDM until it reaches `trigger_point`
/// and returns the elapsed time, interpolated within the crossing step.
/// Returns kNoArrival if the point is not reached within `horizon` seconds.
double predict_eta(const VehicleState& leader, const std::optional<PredecessorTrack>& predecessor,
                   double trigger_point, const IdmParams& params, double dt,
                   double horizon = 300.0);

struct LeaderRegulationGains {
  double kp = 0.5;  // 1/s
};

struct LeaderCommand {
  double accel = 0.0;
  bool regulated = false;
};

/// One-sided arrival regulation: slows a leader predicted to reach the
/// trigger point before `target_time` (remaining seconds). Otherwise returns
/// the IDM acceleration unchanged. The command never exceeds `idm_accel`.
LeaderCommand regulate_leader(const VehicleState& leader, double trigger_point, double target_time,
                              double current_eta, double idm_accel, const ControlLimits& limits,
                              const LeaderRegulationGains& gains = {});

}  // namespace rampmerge
