#include <doctest.h>

#include <cmath>
#include <random>

#include "rampmerge/fuel_model.hpp"
#include "rampmerge/sim_engine.hpp"

using namespace rampmerge;

namespace {

TrajectoryRow row(double t, VehicleId id, Lane lane, double speed, double fuel = 0.0) {
  TrajectoryRow r;
  r.t = t;
  r.id = id;
  r.lane = lane;
  r.speed = speed;
  r.fuel_rate = fuel;
  return r;
}

ScenarioConfig short_scenario(int number, ControlMode mode, std::uint64_t seed) {
  ScenarioConfig cfg = table1_scenario(number);
  cfg.mode = mode;
  cfg.seed = seed;
  for (auto& ph : cfg.phases) ph.duration = 150.0;
  return cfg;
}

}  // namespace

TEST_CASE("built-in scenarios carry the two demand phases") {
  const ScenarioConfig s1 = table1_scenario(1);
  REQUIRE(s1.phases.size() == 2);
  CHECK(s1.phases[0].duration == 600.0);
  CHECK(s1.phases[0].mainline_demand == 1600.0);
  CHECK(s1.phases[0].ramp_demand == 500.0);
  CHECK(s1.phases[1].mainline_demand == 1200.0);
  CHECK(s1.phases[1].ramp_demand == 300.0);
  const ScenarioConfig s2 = table1_scenario(2);
  CHECK(s2.phases[0].ramp_demand == 300.0);
  CHECK(s2.phases[1].ramp_demand == 500.0);
  CHECK(s1.duration() == 1200.0);
  CHECK_NOTHROW(s1.validate());
  CHECK_THROWS_AS(table1_scenario(3), std::invalid_argument);
}

TEST_CASE("invalid scenario fields are named") {
  ScenarioConfig cfg = table1_scenario(1);
  cfg.phases[1].ramp_demand = -1.0;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("phases[1].ramp_demand"), std::invalid_argument);
  cfg = table1_scenario(1);
  cfg.controller.horizon = 0;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("controller.horizon"), std::invalid_argument);
}

TEST_CASE("zero demand produces no arrivals") {
  CHECK(generate_arrivals(0.0, 0.0, 600.0, 1).empty());
}

TEST_CASE("arrival counts concentrate like a Poisson process") {
  int inside = 0;
  const int seeds = 400;
  for (int s = 1; s <= seeds; ++s) {
    const auto a = generate_arrivals(3600.0, 0.0, 600.0, static_cast<std::uint64_t>(s), 0.0);
    inside += std::abs(static_cast<double>(a.size()) - 600.0) <= 3.0 * std::sqrt(600.0);
  }
  CHECK(static_cast<double>(inside) / seeds >= 0.99);
}

TEST_CASE("arrivals keep the mean rate and the minimum headway") {
  double total = 0.0;
  for (int s = 1; s <= 50; ++s) {
    const auto a = generate_arrivals(1600.0, 0.0, 3600.0, static_cast<std::uint64_t>(s), 1.0);
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i] - a[i - 1] >= 1.0 - 1e-12);
    total += static_cast<double>(a.size());
  }
  CHECK(total / 50.0 == doctest::Approx(1600.0).epsilon(0.02));
}

TEST_CASE("arrivals are deterministic in the seed") {
  CHECK(generate_arrivals(500.0, 0.0, 600.0, 7) == generate_arrivals(500.0, 0.0, 600.0, 7));
  CHECK(generate_arrivals(500.0, 0.0, 600.0, 7) != generate_arrivals(500.0, 0.0, 600.0, 8));
}

TEST_CASE("one mile in one minute is 60 mph") {
  TrajectoryLog log;
  log.dt = 0.1;
  const double v = units::kMetersPerMile / 60.0;
  for (int k = 0; k < 600; ++k) log.rows.push_back(row(k * 0.1, 1, Lane::Mainline, v));
  const RunMetrics m = compute_metrics(log);
  CHECK(m.overall.q == doctest::Approx(60.0));
  CHECK(m.overall.vmt == doctest::Approx(1.0));
  CHECK(m.overall.vehicles == 1);
}

TEST_CASE("equal speeds give that speed regardless of distance") {
  TrajectoryLog log;
  log.dt = 0.1;
  const double v = units::mph_to_mps(30.0);
  for (int k = 0; k < 50; ++k) log.rows.push_back(row(k * 0.1, 1, Lane::Mainline, v));
  for (int k = 0; k < 700; ++k) log.rows.push_back(row(k * 0.1, 2, Lane::Ramp, v));
  const RunMetrics m = compute_metrics(log);
  CHECK(m.overall.q == doctest::Approx(30.0));
  CHECK(m.mainline.q == doctest::Approx(30.0));
  CHECK(m.ramp.q == doctest::Approx(30.0));
}

TEST_CASE("Q equals the time-weighted mean speed") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> speed(0.0, 35.0);
  TrajectoryLog log;
  log.dt = 0.1;
  double sum = 0.0;
  for (int k = 0; k < 2000; ++k) {
    const double v = speed(rng);
    sum += v;
    log.rows.push_back(row((k / 7) * 0.1, k % 7, k % 7 < 3 ? Lane::Ramp : Lane::Mainline, v, 0.5));
  }
  const RunMetrics m = compute_metrics(log);
  CHECK(m.overall.q == doctest::Approx(units::mps_to_mph(sum / 2000.0)).epsilon(1e-12));
  CHECK(m.overall.vehicles == 7);
  CHECK(m.ramp.vehicles == 3);
}

TEST_CASE("origin lane is the lane of the first row") {
  TrajectoryLog log;
  log.dt = 0.1;
  log.rows.push_back(row(0.1, 5, Lane::Mainline, 20.0));
  log.rows.push_back(row(0.0, 5, Lane::Ramp, 10.0));
  const RunMetrics m = compute_metrics(log);
  CHECK(m.ramp.vehicles == 1);
  CHECK(m.mainline.vehicles == 0);
  CHECK(compute_metrics(TrajectoryLog{}).overall.q == 0.0);
}

TEST_CASE("free flow runs at the desired speed and the cruise economy") {
  for (ControlMode mode : {ControlMode::OptimalControl, ControlMode::RampMetering, ControlMode::NoControl}) {
    ScenarioConfig cfg = table1_scenario(1);
    cfg.mode = mode;
    cfg.phases = {{300.0, 200.0, 0.0, 1600.0}};
    const RunResult r = run(cfg, {false});
    const double v0 = cfg.mainline_idm.v0;
    const double cruise = economy_mpg(v0, fuel_rate(v0, 0.0, cfg.fuel));
    CAPTURE(to_string(mode));
    CHECK(r.metrics.overall.q == doctest::Approx(units::mps_to_mph(v0)).epsilon(0.02));
    CHECK(r.metrics.overall.mpg == doctest::Approx(cruise).epsilon(0.05));
    CHECK(r.metrics.ramp.vehicles == 0);
  }
}

TEST_CASE("vehicles are conserved") {
  for (ControlMode mode : {ControlMode::OptimalControl, ControlMode::RampMetering, ControlMode::NoControl}) {
    const RunResult r = run(short_scenario(1, mode, 2));
    CAPTURE(to_string(mode));
    CHECK(r.stats.spawned > 0);
    CHECK(r.stats.spawned == r.stats.exited + r.stats.final_population);
    CHECK(r.metrics.overall.vehicles == r.stats.spawned);
  }
}

TEST_CASE("baseline modes receive no coordinator commands") {
  for (ControlMode mode : {ControlMode::RampMetering, ControlMode::NoControl}) {
    const RunResult r = run(short_scenario(1, mode, 3));
    CHECK(r.stats.coordinator_commands == 0);
    CHECK(r.stats.triggers == 0);
    CHECK(r.events.empty());
    for (const auto& row : r.log.rows) {
      REQUIRE(row.status == ControlStatus::Uncontrolled);
    }
  }
  const RunResult opt = run(short_scenario(1, ControlMode::OptimalControl, 3));
  CHECK(opt.stats.coordinator_commands > 0);
  CHECK(opt.stats.triggers > 0);
}

TEST_CASE("metering releases at the suggested rate") {
  const RunResult r = run(short_scenario(1, ControlMode::RampMetering, 4), {false});
  CHECK(r.stats.metering_releases > 0);
  // 150 s at 200 veh/h then 150 s at 600 veh/h.
  CHECK(static_cast<double>(r.stats.metering_releases) <= 150.0 / 18.0 + 150.0 / 6.0 + 2.0);
}

TEST_CASE("runs are deterministic") {
  const ScenarioConfig cfg = short_scenario(2, ControlMode::OptimalControl, 5);
  const RunResult a = run(cfg);
  const RunResult b = run(cfg);
  REQUIRE(a.log.rows.size() == b.log.rows.size());
  bool same = true;
  for (std::size_t i = 0; i < a.log.rows.size(); ++i) {
    const auto& x = a.log.rows[i];
    const auto& y = b.log.rows[i];
    same = same && x.t == y.t && x.id == y.id && x.position == y.position && x.speed == y.speed &&
           x.accel == y.accel && x.status == y.status && x.fuel_rate == y.fuel_rate;
  }
  CHECK(same);
  CHECK(a.trigger_crossings == b.trigger_crossings);
}

TEST_CASE("inflow window counts against the phase integral") {
  ScenarioConfig cfg = table1_scenario(1);
  const std::vector<double> none;
  const InflowWindow empty = worst_inflow_window(none, cfg);
  CHECK(empty.count == 0);
  std::vector<double> crossings;
  for (double t = 10.0; t < 1200.0; t += 18.0) crossings.push_back(t);
  const InflowWindow w = worst_inflow_window(crossings, cfg);
  CHECK(w.allowed >= 300.0 / 18.0 - 1e-9);
  CHECK(w.ratio <= 1.05);
  crossings.clear();
  for (double t = 10.0; t < 310.0; t += 10.0) crossings.push_back(t);
  const InflowWindow dense = worst_inflow_window(crossings, cfg);
  CHECK(dense.count == 30);
  CHECK(dense.allowed == doctest::Approx(300.0 / 18.0));
  CHECK(dense.ratio > 1.5);
}
