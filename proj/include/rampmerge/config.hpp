#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "rampmerge/sim_engine.hpp"

namespace rampmerge {

/// Invalid configuration. `field()` is the dotted path of the offending key,
/// e.g. "limits.acc_min" or "phases[1].ramp_demand".
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Parses a JSON scenario. Missing keys keep their defaults; `"base": 1` or 2
/// starts from the corresponding built-in scenario. Numbers are SI (demands in
/// veh/h); strings such as "73.8 mph", "-9.8 ft/s2" or "0.5 veh/s" are
/// converted. Unknown keys and failed validation raise ConfigError.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Every resolved parameter in SI, keys sorted. parse_config of the result
/// reproduces the same config.
std::string serialize_config(const ScenarioConfig& config);

/// FNV-1a 64 over the serialized config, as 16 hex digits. Independent of the
/// key order of the source file.
std::string config_hash(const ScenarioConfig& config);

/// Converts "<number> <unit>" to SI. Throws std::invalid_argument for unknown
/// units. `dimension` is one of length, time, speed, accel, flow, or empty.
double parse_quantity(const std::string& text, const std::string& dimension);

}  // namespace rampmerge
