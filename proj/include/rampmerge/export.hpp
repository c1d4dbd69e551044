#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rampmerge/sim_engine.hpp"

namespace rampmerge {

inline constexpr const char* kTrajectoryHeader = "t,id,lane,position,speed,accel,status,fuel_rate";

/// One row per line, fixed 6 decimals, sorted by (t, id).
void write_trajectories(const TrajectoryLog& log, std::ostream& out);
/// Throws std::runtime_error naming the path when the file cannot be written.
void export_trajectories(const TrajectoryLog& log, const std::filesystem::path& path);

/// Reads an exported file back. `dt` defaults to the smallest step between
/// distinct timestamps (0.1 s for files with fewer than two steps).
TrajectoryLog import_trajectories(const std::filesystem::path& path,
                                  std::optional<double> dt = std::nullopt);

struct ModeResult {
  ControlMode mode = ControlMode::OptimalControl;
  RunMetrics metrics;
};

/// Percentage change of `value` over `baseline` (0 when the baseline is 0).
double improvement_percent(double value, double baseline);

/// Machine-readable report: per mode the Overall/Mainline/Ramp metrics in
/// US customary units and SI, plus improvements of the first mode over the others.
std::string report_json(const std::vector<ModeResult>& results, const std::string& title = "");
/// Aligned text table, one row per group and metric, one column per mode.
std::string report_table(const std::vector<ModeResult>& results, const std::string& title = "");
/// Writes <stem>.json and <stem>.txt.
void report_metrics(const std::vector<ModeResult>& results, const std::filesystem::path& stem,
                    const std::string& title = "");

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  ControlMode mode = ControlMode::OptimalControl;
  std::string started;   // UTC, ISO 8601
  std::string finished;
  std::vector<std::string> outputs;
  RunMetrics metrics;
};

std::string manifest_json(const RunManifest& manifest);
std::string utc_timestamp();

/// FNV-1a 64 digest of a file's bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

}  // namespace rampmerge
