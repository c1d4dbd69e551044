#include "rampmerge/fuel_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "rampmerge/vehicle_model.hpp"

namespace rampmerge {

void FuelCoefficients::validate() const {
  for (double c : {b0, b1, b2, b3, c0, c1, c2}) {
    if (!std::isfinite(c)) throw std::invalid_argument("fuel coefficients must be finite");
  }
}

double raw_fuel_rate(double speed, double accel, const FuelCoefficients& k) {
  const double v = speed;
  return k.b0 + v * (k.b1 + v * (k.b2 + v * k.b3)) + accel * (k.c0 + v * (k.c1 + v * k.c2));
}

double fuel_rate(double speed, double accel, const FuelCoefficients& coeffs) {
  if (speed < 0.0) {
    throw std::domain_error("fuel_rate: negative speed " + std::to_string(speed));
  }
  return std::max(0.0, raw_fuel_rate(speed, accel, coeffs));
}

double trajectory_fuel(std::span<const double> speeds, std::span<const double> accels, double dt,
                       const FuelCoefficients& coeffs) {
  if (speeds.size() != accels.size()) {
    throw std::invalid_argument("trajectory_fuel: speed and acceleration series differ in length");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("trajectory_fuel: dt must be > 0");
  double total = 0.0;
  for (std::size_t k = 0; k < speeds.size(); ++k) total += fuel_rate(speeds[k], accels[k], coeffs);
  return total * dt;
}

double economy_mpg(double distance_m, double fuel_ml) {
  if (distance_m <= 0.0) return 0.0;
  if (fuel_ml <= 0.0) return std::numeric_limits<double>::infinity();
  return (distance_m / units::kMetersPerMile) / (fuel_ml / units::kMillilitersPerGallon);
}

}  // namespace rampmerge
