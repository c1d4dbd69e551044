#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rampmerge/config.hpp"
#include "rampmerge/export.hpp"

using namespace rampmerge;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "rampmerge_test_cli_io";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::string field_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

TrajectoryRow row(double t, VehicleId id, double position, double speed) {
  TrajectoryRow r;
  r.t = t;
  r.id = id;
  r.position = position;
  r.speed = speed;
  r.fuel_rate = 1.0 + speed / 10.0;
  return r;
}

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b)) || a == b;
}

}  // namespace

TEST_CASE("a config round-trips through its serialized form") {
  for (int base : {1, 2}) {
    const ScenarioConfig cfg = table1_scenario(base);
    const std::string text = serialize_config(cfg);
    const ScenarioConfig back = parse_config(text);
    CHECK(serialize_config(back) == text);
    CHECK(config_hash(back) == config_hash(cfg));
  }
  ScenarioConfig tweaked = table1_scenario(1);
  tweaked.seed = 42;
  tweaked.mode = ControlMode::RampMetering;
  tweaked.controller.hold_distance = 55.5;
  tweaked.phases.push_back({120.0, 800.0, 100.0, 1000.0});
  const ScenarioConfig back = parse_config(serialize_config(tweaked));
  CHECK(back.seed == 42);
  CHECK(back.mode == ControlMode::RampMetering);
  CHECK(back.phases.size() == 3);
  CHECK(serialize_config(back) == serialize_config(tweaked));
  CHECK(config_hash(back) != config_hash(table1_scenario(1)));
}

TEST_CASE("the serialized config names every section") {
  const auto doc = nlohmann::json::parse(serialize_config(table1_scenario(1)));
  for (const char* key : {"geometry", "phases", "limits", "weights", "mainline_idm", "ramp_idm", "fuel",
                          "metering", "merging", "controller", "mode", "seed", "dt"}) {
    CHECK_MESSAGE(doc.contains(key), key);
  }
  CHECK(doc["controller"].size() == 18);
  CHECK(doc["geometry"].size() == 8);
}

TEST_CASE("the hash ignores key order") {
  const std::string a = R"({"base": 1, "seed": 3, "limits": {"acc_min": -3.0, "acc_max": 2.5}})";
  const std::string b = R"({"limits": {"acc_max": 2.5, "acc_min": -3.0}, "seed": 3, "base": 1})";
  CHECK(config_hash(parse_config(a)) == config_hash(parse_config(b)));
  CHECK(config_hash(parse_config(a)).size() == 16);
}

TEST_CASE("imperial quantities are converted on load") {
  const ScenarioConfig cfg = parse_config(R"({
    "base": 1,
    "limits": {"acc_min": "-9.8 ft/s2", "acc_max": "8.2 ft/s^2"},
    "controller": {"merge_speed": "73.8 mph", "gap_margin": "10 ft"},
    "phases": [{"duration": "10 min", "mainline_demand": "0.5 veh/s", "ramp_demand": 300,
                "q_suggested": "5 veh/min"}]
  })");
  CHECK(cfg.limits.acc_min == doctest::Approx(-2.98704));
  CHECK(cfg.limits.acc_max == doctest::Approx(2.49936));
  CHECK(cfg.controller.merge_speed == doctest::Approx(32.991552));
  CHECK(cfg.controller.gap_margin == doctest::Approx(3.048));
  REQUIRE(cfg.phases.size() == 1);
  CHECK(cfg.phases[0].duration == 600.0);
  CHECK(cfg.phases[0].mainline_demand == 1800.0);
  CHECK(cfg.phases[0].q_suggested == 300.0);
  CHECK(parse_quantity("36 km/h", "speed") == doctest::Approx(10.0));
  CHECK(parse_quantity("12.5", "length") == 12.5);
}

TEST_CASE("config errors name the field") {
  CHECK(field_of(R"({"base": 1, "limits": {"acc_min": 0.5}})") == "limits.acc_min");
  CHECK(field_of(R"({"base": 1, "limits": {"acc_min": "5 mph"}})") == "limits.acc_min");
  CHECK(field_of(R"({"base": 1, "controller": {"horizn": 10}})") == "controller.horizn");
  CHECK(field_of(R"({"base": 1, "controller": {"horizon": 2.5}})") == "controller.horizon");
  CHECK(field_of(R"({"base": 1, "phases": [{"duration": -1}]})") == "phases[0].duration");
  CHECK(field_of(R"({"base": 1, "mode": "fast"})") == "mode");
  CHECK(field_of(R"({"base": 7})") == "base");
  CHECK(field_of(R"({"seed": "x"})") == "seed");
  CHECK(field_of("{not json") == "<document>");
  CHECK(field_of(R"({"base": 1, "weights": {"input_weight": 0}})") == "weights.input_weight");
}

TEST_CASE("an empty log exports a header-only file") {
  const fs::path p = scratch("empty.csv");
  export_trajectories(TrajectoryLog{}, p);
  const auto lines = lines_of(p);
  REQUIRE(lines.size() == 1);
  CHECK(lines[0] == kTrajectoryHeader);
}

TEST_CASE("rows are written sorted by time then id") {
  TrajectoryLog log;
  for (int step = 2; step >= 0; --step) {
    log.rows.push_back(row(step * 0.1, 9, -100.0 + step, 20.0));
    log.rows.push_back(row(step * 0.1, 4, -50.0 + step, 25.0));
  }
  const fs::path p = scratch("six.csv");
  export_trajectories(log, p);
  const auto lines = lines_of(p);
  REQUIRE(lines.size() == 7);
  CHECK(lines[1] == "0.000000,4,mainline,-50.000000,25.000000,0.000000,uncontrolled,3.500000");
  CHECK(lines[2].rfind("0.000000,9,", 0) == 0);
  CHECK(lines[3].rfind("0.100000,4,", 0) == 0);
  CHECK(lines[6].rfind("0.200000,9,", 0) == 0);
}

TEST_CASE("writing to a missing directory reports the path") {
  const fs::path p = scratch("no_such_dir") / "x" / "t.csv";
  std::string message;
  try {
    export_trajectories(TrajectoryLog{}, p);
  } catch (const std::runtime_error& e) {
    message = e.what();
  }
  CHECK(message.find(p.string()) != std::string::npos);
}

TEST_CASE("exported trajectories re-import to the same metrics") {
  ScenarioConfig cfg = table1_scenario(1);
  for (auto& ph : cfg.phases) ph.duration = 120.0;
  const RunResult r = run(cfg);
  const fs::path p = scratch("run.csv");
  export_trajectories(r.log, p);
  const TrajectoryLog back = import_trajectories(p);
  CHECK(back.dt == doctest::Approx(cfg.dt));
  REQUIRE(back.rows.size() == r.log.rows.size());

  for (std::size_t i = 0; i < back.rows.size(); i += 97) {
    const auto& a = back.rows[i];
    const auto& b = r.log.rows[i];
    CHECK(a.id == b.id);
    CHECK(a.lane == b.lane);
    CHECK(a.status == b.status);
    CHECK(std::abs(a.position - b.position) <= 5e-7 + 1e-9);
    CHECK(std::abs(a.speed - b.speed) <= 5e-7 + 1e-9);
    CHECK(std::abs(a.fuel_rate - b.fuel_rate) <= 5e-7 + 1e-9);
  }

  const RunMetrics m0 = r.metrics;
  const RunMetrics m1 = compute_metrics(back);
  for (auto group : {&RunMetrics::overall, &RunMetrics::mainline, &RunMetrics::ramp}) {
    const GroupMetrics& a = m1.*group;
    const GroupMetrics& b = m0.*group;
    CHECK(close_rel(a.q, b.q, 1e-9));
    CHECK(close_rel(a.vmt, b.vmt, 1e-9));
    CHECK(close_rel(a.vht, b.vht, 1e-12));
    CHECK(a.vehicles == b.vehicles);
    // Each fuel_rate is rounded to 5e-7 mL/s, so the total can move by at
    // most rows * dt * 5e-7.
    const double rows = b.vht * units::kSecondsPerHour / cfg.dt;
    const double fuel_bound = rows * cfg.dt * 5e-7 / b.fuel_ml;
    CHECK(close_rel(a.fuel_ml, b.fuel_ml, fuel_bound));
    CHECK(close_rel(a.mpg, b.mpg, fuel_bound + 1e-9));
  }
}

TEST_CASE("same seed gives byte-identical exports") {
  ScenarioConfig cfg = table1_scenario(2);
  for (auto& ph : cfg.phases) ph.duration = 90.0;
  const fs::path a = scratch("det_a.csv");
  const fs::path b = scratch("det_b.csv");
  export_trajectories(run(cfg).log, a);
  export_trajectories(run(cfg).log, b);
  CHECK(file_digest(a) == file_digest(b));
  cfg.seed = 2;
  const fs::path c = scratch("det_c.csv");
  export_trajectories(run(cfg).log, c);
  CHECK(file_digest(a) != file_digest(c));
}

TEST_CASE("improvements follow the relative-change convention") {
  CHECK(std::round(improvement_percent(69.19, 33.01) * 10.0) / 10.0 == 109.6);
  CHECK(std::round(improvement_percent(70.45, 29.14) * 10.0) / 10.0 == 141.8);
  CHECK(improvement_percent(5.0, 5.0) == 0.0);
  CHECK(improvement_percent(5.0, 0.0) == 0.0);
}

TEST_CASE("report table has the three groups and improvement columns") {
  auto metrics = [](double q, double mpg) {
    RunMetrics m;
    for (auto g : {&RunMetrics::overall, &RunMetrics::mainline, &RunMetrics::ramp}) {
      (m.*g).q = q;
      (m.*g).mpg = mpg;
    }
    return m;
  };
  const std::vector<ModeResult> results{{ControlMode::OptimalControl, metrics(69.19, 40.0)},
                                        {ControlMode::RampMetering, metrics(33.01, 30.0)},
                                        {ControlMode::NoControl, metrics(27.99, 30.0)}};
  const std::string table = report_table(results, "Scenario 1");
  for (const char* token : {"Overall", "Mainline", "Ramp", "optimal", "metering", "none", "vs metering",
                            "vs none", "+109.6%", "+147.2%", "69.19", "Q (mph)", "Economy (mpg)"}) {
    CHECK_MESSAGE(table.find(token) != std::string::npos, token);
  }
  // Columns line up: every data row has the same length.
  std::istringstream in(table);
  std::string line;
  std::getline(in, line);  // title
  std::size_t width = 0;
  while (std::getline(in, line)) {
    if (width == 0) width = line.size();
    CHECK(line.size() == width);
  }

  const auto doc = nlohmann::json::parse(report_json(results, "Scenario 1"));
  CHECK(doc["modes"]["optimal"]["overall"]["q_mph"] == 69.19);
  CHECK(doc["modes"]["optimal"]["overall"]["q_mps"].get<double>() ==
        doctest::Approx(units::mph_to_mps(69.19)));
  CHECK(doc["improvement_over"]["metering"]["overall"]["q_percent"].get<double>() ==
        doctest::Approx(109.6).epsilon(1e-3));

  const std::vector<ModeResult> same{{ControlMode::OptimalControl, metrics(50, 30)},
                                     {ControlMode::NoControl, metrics(50, 30)}};
  const auto flat = nlohmann::json::parse(report_json(same));
  CHECK(flat["improvement_over"]["none"]["ramp"]["q_percent"] == 0.0);
  CHECK(flat["improvement_over"]["none"]["ramp"]["mpg_percent"] == 0.0);
}

TEST_CASE("manifest records the run") {
  RunManifest m;
  m.config_hash = config_hash(table1_scenario(1));
  m.seed = 4;
  m.mode = ControlMode::NoControl;
  m.started = utc_timestamp();
  m.finished = m.started;
  m.outputs = {"trajectory_none_seed4.csv"};
  const auto doc = nlohmann::json::parse(manifest_json(m));
  CHECK(doc["config_hash"] == m.config_hash);
  CHECK(doc["seed"] == 4);
  CHECK(doc["mode"] == "none");
  CHECK(doc["outputs"].size() == 1);
  CHECK(doc["metrics"].contains("overall"));
  CHECK(m.started.size() == 20);
}
