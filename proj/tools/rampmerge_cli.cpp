// rampmerge: run, compare and sweep on-ramp merge simulations.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rampmerge/config.hpp"
#include "rampmerge/export.hpp"
#include "rampmerge/sim_engine.hpp"

namespace fs = std::filesystem;
using namespace rampmerge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitCollision = 3;

struct Source {
  std::string config_path;
  int scenario = 0;
};

void add_source(CLI::App* cmd, Source& src) {
  auto* cfg = cmd->add_option("--config", src.config_path, "JSON scenario file")->check(CLI::ExistingFile);
  auto* sc = cmd->add_option("--scenario", src.scenario, "built-in scenario (1 or 2)")
                 ->check(CLI::IsMember({1, 2}));
  cfg->excludes(sc);
}

ScenarioConfig resolve(const Source& src) {
  if (!src.config_path.empty()) return load_config(src.config_path);
  ScenarioConfig cfg = table1_scenario(src.scenario ? src.scenario : 1);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("<scenario>", e.what());
  }
  return cfg;
}

std::string default_out_dir() {
  const char* env = std::getenv("RAMPMERGE_OUT");
  return env && *env ? env : "rampmerge_out";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string stem_for(const ScenarioConfig& cfg) {
  return std::string(to_string(cfg.mode)) + "_seed" + std::to_string(cfg.seed);
}

RunResult run_one(ScenarioConfig cfg, const fs::path& out, bool record) {
  const std::string started = utc_timestamp();
  RunResult result = run(cfg, {record});
  RunManifest manifest;
  manifest.config_hash = config_hash(cfg);
  manifest.seed = cfg.seed;
  manifest.mode = cfg.mode;
  manifest.started = started;
  manifest.metrics = result.metrics;

  const std::string stem = stem_for(cfg);
  if (record) {
    const fs::path traj = out / ("trajectory_" + stem + ".csv");
    export_trajectories(result.log, traj);
    manifest.outputs.push_back(traj.filename().string());
  }
  const fs::path metrics = out / ("metrics_" + stem);
  report_metrics({{cfg.mode, result.metrics}}, metrics, cfg.name + " " + stem);
  manifest.outputs.push_back(metrics.filename().string() + ".json");
  manifest.outputs.push_back(metrics.filename().string() + ".txt");
  const fs::path config_copy = out / ("config_" + stem + ".json");
  write_text(config_copy, serialize_config(cfg));
  manifest.outputs.push_back(config_copy.filename().string());
  manifest.finished = utc_timestamp();
  write_text(out / ("manifest_" + stem + ".json"), manifest_json(manifest));
  return result;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::vector<ControlMode> parse_modes(const std::vector<std::string>& names) {
  std::vector<ControlMode> modes;
  for (const auto& n : names) {
    try {
      modes.push_back(mode_from_string(n));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("--modes", e.what());
    }
  }
  return modes;
}

int cmd_run(const Source& src, const std::string& mode, std::uint64_t seed, bool seed_set,
            const std::string& out_dir, bool no_trajectory) {
  ScenarioConfig cfg = resolve(src);
  if (!mode.empty()) {
    try {
      cfg.mode = mode_from_string(mode);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("--mode", e.what());
    }
  }
  if (seed_set) cfg.seed = seed;
  fs::create_directories(out_dir);
  const RunResult r = run_one(cfg, out_dir, !no_trajectory);
  std::cout << report_table({{cfg.mode, r.metrics}}, cfg.name + " " + stem_for(cfg));
  std::cout << "wrote " << fs::path(out_dir).string() << "\n";
  return kExitOk;
}

int cmd_compare(const Source& src, std::uint64_t seed, bool seed_set, const std::string& out_dir) {
  ScenarioConfig base = resolve(src);
  if (seed_set) base.seed = seed;
  fs::create_directories(out_dir);
  std::vector<ModeResult> results;
  for (ControlMode m : {ControlMode::OptimalControl, ControlMode::RampMetering, ControlMode::NoControl}) {
    ScenarioConfig cfg = base;
    cfg.mode = m;
    results.push_back({m, run_one(cfg, out_dir, true).metrics});
  }
  const std::string title = base.name + " seed " + std::to_string(base.seed);
  report_metrics(results, fs::path(out_dir) / "report", title);
  std::cout << report_table(results, title);
  return kExitOk;
}

int cmd_sweep(const Source& src, int seeds, std::uint64_t first_seed, const std::vector<std::string>& mode_names,
              unsigned jobs, const std::string& out_dir) {
  const ScenarioConfig base = resolve(src);
  const auto modes = parse_modes(mode_names);
  if (seeds < 1) throw ConfigError("--seeds", "must be >= 1");
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  fs::create_directories(out_dir);

  struct Job {
    ControlMode mode;
    std::uint64_t seed;
  };
  std::vector<Job> work;
  for (ControlMode m : modes) {
    for (int k = 0; k < seeds; ++k) work.push_back({m, first_seed + static_cast<std::uint64_t>(k)});
  }
  std::vector<RunMetrics> metrics(work.size());
  for (std::size_t start = 0; start < work.size(); start += jobs) {
    std::vector<std::future<RunMetrics>> batch;
    for (std::size_t i = start; i < std::min(work.size(), start + jobs); ++i) {
      ScenarioConfig cfg = base;
      cfg.mode = work[i].mode;
      cfg.seed = work[i].seed;
      const fs::path dir = fs::path(out_dir) / ("seed" + std::to_string(cfg.seed));
      fs::create_directories(dir);
      batch.push_back(std::async(std::launch::async, [cfg, dir] { return run_one(cfg, dir, false).metrics; }));
    }
    for (std::size_t i = 0; i < batch.size(); ++i) metrics[start + i] = batch[i].get();
  }

  nlohmann::ordered_json doc;
  doc["config_hash"] = config_hash(base);
  doc["seeds"] = seeds;
  doc["first_seed"] = first_seed;
  std::ostringstream table;
  table << base.name << ": " << seeds << " seeds from " << first_seed << "\n";
  table << std::left << std::setw(10) << "mode" << std::setw(20) << "Q (mph)" << "Economy (mpg)\n";
  for (ControlMode m : modes) {
    std::vector<double> q, mpg;
    for (std::size_t i = 0; i < work.size(); ++i) {
      if (work[i].mode != m) continue;
      q.push_back(metrics[i].overall.q);
      mpg.push_back(metrics[i].overall.mpg);
    }
    const std::string name(to_string(m));
    doc["modes"][name] = {{"q_mph_mean", mean(q)}, {"q_mph_sd", stddev(q)}, {"q_mph", q},
                          {"mpg_mean", mean(mpg)}, {"mpg_sd", stddev(mpg)}, {"mpg", mpg}};
    std::ostringstream qs, ms;
    qs << std::fixed << std::setprecision(2) << mean(q) << " +/- " << stddev(q);
    ms << std::fixed << std::setprecision(2) << mean(mpg) << " +/- " << stddev(mpg);
    table << std::left << std::setw(10) << name << std::setw(20) << qs.str() << ms.str() << "\n";
  }
  write_text(fs::path(out_dir) / "sweep.json", doc.dump(2) + "\n");
  write_text(fs::path(out_dir) / "sweep.txt", table.str());
  std::cout << table.str();
  return kExitOk;
}

int cmd_validate(const Source& src) {
  const ScenarioConfig cfg = resolve(src);
  std::cout << serialize_config(cfg);
  std::cout << "config_hash " << config_hash(cfg) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"On-ramp merge simulator: optimal control, ramp metering and uncontrolled baselines"};
  app.require_subcommand(1);
  const std::string default_out = default_out_dir();

  Source run_src, cmp_src, sweep_src, val_src;
  std::string mode, run_out = default_out, cmp_out = default_out, sweep_out = default_out;
  std::uint64_t run_seed = 1, cmp_seed = 1, first_seed = 1;
  bool no_trajectory = false;
  int seeds = 5;
  unsigned jobs = 0;
  std::vector<std::string> modes{"optimal", "metering", "none"};

  auto* run_cmd = app.add_subcommand("run", "simulate one mode and write trajectory and metrics");
  add_source(run_cmd, run_src);
  run_cmd->add_option("--mode", mode, "optimal | metering | none");
  auto* run_seed_opt = run_cmd->add_option("--seed", run_seed, "random seed");
  run_cmd->add_option("--out", run_out, "output directory (default $RAMPMERGE_OUT)");
  run_cmd->add_flag("--no-trajectory", no_trajectory, "skip the trajectory CSV");

  auto* cmp_cmd = app.add_subcommand("compare", "run all three modes and tabulate");
  add_source(cmp_cmd, cmp_src);
  auto* cmp_seed_opt = cmp_cmd->add_option("--seed", cmp_seed, "random seed");
  cmp_cmd->add_option("--out", cmp_out, "output directory (default $RAMPMERGE_OUT)");

  auto* sweep_cmd = app.add_subcommand("sweep", "repeat over seeds and report mean +/- sd");
  add_source(sweep_cmd, sweep_src);
  sweep_cmd->add_option("--seeds", seeds, "number of seeds")->capture_default_str();
  sweep_cmd->add_option("--first-seed", first_seed, "first seed")->capture_default_str();
  sweep_cmd->add_option("--modes", modes, "modes to run")->capture_default_str();
  sweep_cmd->add_option("--jobs", jobs, "concurrent runs (0 = hardware threads)");
  sweep_cmd->add_option("--out", sweep_out, "output directory (default $RAMPMERGE_OUT)");

  auto* val_cmd = app.add_subcommand("validate", "check a config and print the resolved SI parameters");
  add_source(val_cmd, val_src);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run_cmd) return cmd_run(run_src, mode, run_seed, run_seed_opt->count() > 0, run_out, no_trajectory);
    if (*cmp_cmd) return cmd_compare(cmp_src, cmp_seed, cmp_seed_opt->count() > 0, cmp_out);
    if (*sweep_cmd) return cmd_sweep(sweep_src, seeds, first_seed, modes, jobs, sweep_out);
    if (*val_cmd) return cmd_validate(val_src);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CollisionError& e) {
    std::cerr << "collision: " << e.what() << "\n";
    return kExitCollision;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
