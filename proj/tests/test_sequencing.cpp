#include <doctest.h>

#include <algorithm>
#include <set>

#include "oracles.hpp"
#include "rampmerge/sequencing.hpp"

using namespace rampmerge;

namespace {

VehicleState vehicle(VehicleId id, Lane lane, double position, double speed) {
  VehicleState s;
  s.id = id;
  s.lane = lane;
  s.position = position;
  s.speed = speed;
  s.initial_speed = speed;
  return s;
}

std::vector<VehicleId> ids(int first, int count) {
  std::vector<VehicleId> out;
  for (int i = 0; i < count; ++i) out.push_back(first + i);
  return out;
}

double refuel(const Rollout& tr, double dt, const FuelCoefficients& c) {
  double total = 0.0;
  const int n = static_cast<int>(tr.inputs.front().size());
  for (int i = 0; i < n; ++i) {
    std::vector<double> v, a;
    for (int k = 0; k < tr.steps(); ++k) {
      v.push_back(std::max(0.0, tr.states[k](n + i)));
      a.push_back(tr.inputs[k](i));
    }
    total += trajectory_fuel(v, a, dt, c);
  }
  return total;
}

StateMap two_by_one() {
  StateMap s;
  s[1] = vehicle(1, Lane::Mainline, -150.0, 30.0);
  s[2] = vehicle(2, Lane::Mainline, -230.0, 30.0);
  s[10] = vehicle(10, Lane::Ramp, -200.0, 15.0);
  return s;
}

}  // namespace

TEST_CASE("enumeration examples") {
  const auto seqs = enumerate_sequences({1, 2}, {10});
  REQUIRE(seqs.size() == 3);
  CHECK(seqs[0].ids == std::vector<VehicleId>{1, 2, 10});
  CHECK(seqs[1].ids == std::vector<VehicleId>{1, 10, 2});
  CHECK(seqs[2].ids == std::vector<VehicleId>{10, 1, 2});
  CHECK(seqs[2].lanes == std::vector<Lane>{Lane::Ramp, Lane::Mainline, Lane::Mainline});

  const auto ramp_only = enumerate_sequences({}, {10, 11, 12});
  REQUIRE(ramp_only.size() == 1);
  CHECK(ramp_only[0].ids == std::vector<VehicleId>{10, 11, 12});
  CHECK(enumerate_sequences({1, 2}, {10, 11}).size() == 6);
}

TEST_CASE("enumeration counts match the recursive oracle and preserve lane order") {
  for (int m = 0; m <= 6; ++m) {
    for (int n = 0; n <= 6; ++n) {
      if (m + n == 0) continue;
      const auto main_ids = ids(1, m);
      const auto ramp_ids = ids(100, n);
      CHECK(interleaving_count(m, n) == oracle::count_interleavings(m, n));
      if (oracle::count_interleavings(m, n) > kDefaultSequenceCap) {
        CHECK_THROWS_AS(enumerate_sequences(main_ids, ramp_ids), EnumerationCapError);
        continue;
      }
      const auto seqs = enumerate_sequences(main_ids, ramp_ids);
      CHECK(seqs.size() == oracle::count_interleavings(m, n));
      std::set<std::vector<VehicleId>> distinct;
      for (const auto& s : seqs) {
        CHECK(preserves_lane_order(s, main_ids, ramp_ids));
        distinct.insert(s.ids);
      }
      CHECK(distinct.size() == seqs.size());
    }
  }
  // Counts past the cap still match without enumerating.
  CHECK(interleaving_count(6, 6) == 924);
  CHECK(enumerate_sequences(ids(1, 6), ids(100, 6), 1000).size() == 924);
}

TEST_CASE("cap error reports the count") {
  try {
    enumerate_sequences(ids(1, 6), ids(100, 5));
    FAIL("expected cap error");
  } catch (const EnumerationCapError& e) {
    CHECK(e.count() == 462);
  }
}

TEST_CASE("order predicate rejects overtaking") {
  MergeSequence s{{2, 1, 10}, {Lane::Mainline, Lane::Mainline, Lane::Ramp}};
  CHECK_FALSE(preserves_lane_order(s, {1, 2}, {10}));
}

TEST_CASE("reference and gap requirements") {
  const StateMap states = two_by_one();
  SequencingConfig cfg;
  cfg.keep_wider_gaps = false;
  const MergeSequence seq{{1, 10, 2}, {Lane::Mainline, Lane::Ramp, Lane::Mainline}};
  const Eigen::VectorXd r = build_reference(seq, states, cfg);
  REQUIRE(r.size() == 5);
  // Ramp follower at 15 m/s: Gap_min 30 + margin < 1.2 * 32.99.
  CHECK(r(0) == doctest::Approx(1.2 * cfg.merge_speed + 5.0));
  // Mainline follower at 30 m/s: Gap_min 60 plus the margin.
  CHECK(r(1) == doctest::Approx(60.0 + cfg.gap_margin + 5.0));
  CHECK(r(4) == cfg.merge_speed);

  const auto gaps = gap_requirements(seq, states, cfg.limits);
  REQUIRE(gaps.size() == 2);
  CHECK(gaps[0].cross_lane);
  CHECK(gaps[0].gap_min == doctest::Approx(30.0));

  // Same-lane pair starting inside Gap_min keeps its initial gap as floor.
  const MergeSequence main_pair{{1, 2}, {Lane::Mainline, Lane::Mainline}};
  const auto relaxed = gap_requirements(main_pair, states, cfg.limits);
  CHECK_FALSE(relaxed[0].cross_lane);
  CHECK(relaxed[0].gap_min == doctest::Approx(60.0));
  StateMap tight = states;
  tight[2].position = -190.0;  // 35 m net
  CHECK(gap_requirements(main_pair, tight, cfg.limits)[0].gap_min == doctest::Approx(35.0));
}

TEST_CASE("wide initial gaps are kept as the reference") {
  const StateMap states = two_by_one();
  const SequencingConfig cfg;
  const MergeSequence seq{{1, 10, 2}, {Lane::Mainline, Lane::Ramp, Lane::Mainline}};
  const Eigen::VectorXd r = build_reference(seq, states, cfg);
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    const double initial = states.at(seq.ids[i]).position - states.at(seq.ids[i + 1]).position;
    CHECK(r(static_cast<long>(i)) >= initial - 1e-12);
  }
  CHECK(r(0) == doctest::Approx(std::max(1.2 * cfg.merge_speed + 5.0,
                                         states.at(1).position - states.at(10).position)));
}

TEST_CASE("a single cruising vehicle scores the cruise fuel") {
  SequencingConfig cfg;
  StateMap states;
  states[3] = vehicle(3, Lane::Ramp, -200.0, cfg.merge_speed);
  const auto score = score_sequence({{3}, {Lane::Ramp}}, states, cfg);
  CHECK(score.feasible);
  const double expected = fuel_rate(cfg.merge_speed, 0.0, cfg.fuel) * cfg.horizon * cfg.dt;
  CHECK(score.total_fuel == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("scores do not depend on vehicle labels") {
  const SequencingConfig cfg;
  const StateMap a = two_by_one();
  StateMap b;
  const std::vector<std::pair<VehicleId, VehicleId>> relabel{{1, 21}, {2, 22}, {10, 7}};
  for (auto [from, to] : relabel) {
    VehicleState s = a.at(from);
    s.id = to;
    b[to] = s;
  }
  const auto sa = score_sequence({{1, 10, 2}, {Lane::Mainline, Lane::Ramp, Lane::Mainline}}, a, cfg);
  const auto sb = score_sequence({{21, 7, 22}, {Lane::Mainline, Lane::Ramp, Lane::Mainline}}, b, cfg);
  CHECK(sa.total_fuel == sb.total_fuel);
  CHECK(sa.feasible == sb.feasible);
}

TEST_CASE("scored fuel equals independent re-integration of the rollout") {
  const SequencingConfig cfg;
  std::vector<SequenceScore> all;
  optimal_sequence({1, 2}, {10}, two_by_one(), cfg, 1, &all);
  for (const auto& s : all) {
    const double again = refuel(s.prediction.trajectory, cfg.dt, cfg.fuel);
    CHECK(std::abs(again - s.total_fuel) <= 1e-9 * s.total_fuel);
    CHECK(s.total_fuel >= 0.0);
  }
}

TEST_CASE("optimal sequence is the exhaustive minimum") {
  const SequencingConfig cfg;
  const StateMap states = two_by_one();
  std::vector<SequenceScore> all;
  const auto best = optimal_sequence({1, 2}, {10}, states, cfg, 2, &all);
  REQUIRE(all.size() == 3);
  // Independent re-scan: rescore each candidate and take the feasible minimum.
  double min_fuel = std::numeric_limits<double>::infinity();
  MergeSequence argmin;
  for (const auto& seq : enumerate_sequences({1, 2}, {10})) {
    const auto s = score_sequence(seq, states, cfg);
    if (s.feasible && s.total_fuel < min_fuel) {
      min_fuel = s.total_fuel;
      argmin = seq;
    }
  }
  REQUIRE(best.feasible);
  CHECK(best.total_fuel == min_fuel);
  CHECK(best.sequence == argmin);
  CHECK(preserves_lane_order(best.sequence, {1, 2}, {10}));
}

TEST_CASE("a slow ramp vehicle far behind goes second") {
  const SequencingConfig cfg;
  StateMap states;
  states[1] = vehicle(1, Lane::Mainline, -100.0, 30.0);
  states[10] = vehicle(10, Lane::Ramp, -300.0, 10.0);
  const auto best = optimal_sequence({1}, {10}, states, cfg, 1);
  CHECK(best.sequence.ids == std::vector<VehicleId>{1, 10});
}

TEST_CASE("exact ties go to the earliest ramp insertion") {
  SequenceScore a, b, c;
  a.sequence = {{1, 2, 10}, {Lane::Mainline, Lane::Mainline, Lane::Ramp}};
  b.sequence = {{1, 10, 2}, {Lane::Mainline, Lane::Ramp, Lane::Mainline}};
  c.sequence = {{10, 1, 2}, {Lane::Ramp, Lane::Mainline, Lane::Mainline}};
  for (auto* s : {&a, &b, &c}) {
    s->feasible = true;
    s->total_fuel = 42.0;
  }
  CHECK(select_best({a, b, c}) == 2);
  CHECK(select_best({c, b, a}) == 0);
  b.total_fuel = 41.0;
  CHECK(select_best({a, b, c}) == 1);
  a.feasible = false;
  b.feasible = false;
  c.feasible = false;
  c.prediction.violations.violations.resize(2);
  CHECK(select_best({a, b, c}) == 1);
}

TEST_CASE("feasible candidates beat cheaper infeasible ones") {
  SequenceScore a, b;
  a.feasible = false;
  a.total_fuel = 1.0;
  b.feasible = true;
  b.total_fuel = 100.0;
  CHECK(select_best({a, b}) == 1);
}

TEST_CASE("optimal sequence is deterministic across worker counts") {
  const SequencingConfig cfg;
  StateMap states = two_by_one();
  states[11] = vehicle(11, Lane::Ramp, -260.0, 14.0);
  const auto one = optimal_sequence({1, 2}, {10, 11}, states, cfg, 1);
  for (unsigned w : {2u, 3u, 6u}) {
    const auto many = optimal_sequence({1, 2}, {10, 11}, states, cfg, w);
    CHECK(many.sequence == one.sequence);
    CHECK(many.total_fuel == one.total_fuel);
  }
}

TEST_CASE("empty groups are rejected") {
  CHECK_THROWS_AS(optimal_sequence({}, {}, {}, SequencingConfig{}), std::invalid_argument);
}
