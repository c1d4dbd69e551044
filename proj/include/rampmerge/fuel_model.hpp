#pragma once

#include <span>

namespace rampmerge {

/// Polynomial fuel-rate coefficients, mL/s. Defaults are a published
/// flat-road passenger-car calibration.
struct FuelCoefficients {
  double b0 = 0.1569;
  double b1 = 2.450e-2;
  double b2 = -7.415e-4;
  double b3 = 5.975e-5;
  double c0 = 0.07224;
  double c1 = 9.681e-2;
  double c2 = 1.075e-3;

  void validate() const;
};

/// Unclamped polynomial value.
double raw_fuel_rate(double speed, double accel, const FuelCoefficients& coeffs);

/// Instantaneous fuel rate in mL/s, clamped below at zero (fuel cut).
/// Throws std::domain_error for negative speed.
double fuel_rate(double speed, double accel, const FuelCoefficients& coeffs);

/// Left-Riemann sum of fuel_rate over equally spaced samples, in mL.
double trajectory_fuel(std::span<const double> speeds, std::span<const double> accels, double dt,
                       const FuelCoefficients& coeffs);

/// Miles per gallon for a distance in m and fuel in mL. Zero fuel with
/// positive distance yields +infinity.
double economy_mpg(double distance_m, double fuel_ml);

}  // namespace rampmerge
