#include "rampmerge/sim_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace rampmerge {

std::string_view to_string(ControlMode mode) {
  switch (mode) {
    case ControlMode::OptimalControl:
      return "optimal";
    case ControlMode::RampMetering:
      return "metering";
    case ControlMode::NoControl:
      return "none";
  }
  return "unknown";
}

ControlMode mode_from_string(std::string_view text) {
  if (text == "optimal") return ControlMode::OptimalControl;
  if (text == "metering") return ControlMode::RampMetering;
  if (text == "none") return ControlMode::NoControl;
  throw std::invalid_argument("unknown control mode '" + std::string(text) +
                              "' (expected optimal, metering or none)");
}

namespace {

void require(bool ok, const std::string& field, const char* rule) {
  if (!ok) throw std::invalid_argument(field + " " + rule);
}

void validate_idm(const IdmParams& p, const std::string& prefix) {
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    // idm.<field> -> <prefix>.<field>
    std::string msg = e.what();
    if (msg.rfind("idm.", 0) == 0) msg = prefix + msg.substr(3);
    throw std::invalid_argument(msg);
  }
}

}  // namespace

void ScenarioConfig::validate() const {
  geometry.validate();
  limits.validate();
  weights.validate();
  validate_idm(mainline_idm, "mainline_idm");
  validate_idm(ramp_idm, "ramp_idm");
  fuel.validate();
  require(dt > 0.0 && std::isfinite(dt), "dt", "must be > 0");
  require(!phases.empty(), "phases", "must not be empty");
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const std::string base = "phases[" + std::to_string(i) + "].";
    const DemandPhase& ph = phases[i];
    require(ph.duration > 0.0, base + "duration", "must be > 0");
    require(ph.mainline_demand >= 0.0, base + "mainline_demand", "must be >= 0");
    require(ph.ramp_demand >= 0.0, base + "ramp_demand", "must be >= 0");
    require(ph.q_suggested >= 0.0, base + "q_suggested", "must be >= 0");
    if (mode != ControlMode::NoControl && ph.ramp_demand > 0.0) {
      require(ph.q_suggested > 0.0, base + "q_suggested", "must be > 0 for controlled modes");
    }
  }
  require(metering.stop_bar > geometry.ramp_entry() && metering.stop_bar < geometry.merge_zone_entry(),
          "metering.stop_bar", "must lie on the ramp upstream of the merge zone");
  require(metering.release_range > 0.0, "metering.release_range", "must be > 0");
  require(merging.accept_decel > 0.0, "merging.accept_decel", "must be > 0");
  require(merging.forced_decel >= merging.accept_decel, "merging.forced_decel",
          "must be >= merging.accept_decel");
  require(merging.forced_wait >= 0.0, "merging.forced_wait", "must be >= 0");
  require(merging.creep_speed >= 0.0, "merging.creep_speed", "must be >= 0");
  require(merging.forced_zone >= 0.0, "merging.forced_zone", "must be >= 0");
  const ControllerParams& c = controller;
  require(c.horizon >= 1, "controller.horizon", "must be >= 1");
  require(c.merge_speed > 0.0, "controller.merge_speed", "must be > 0");
  require(c.desired_time_headway >= 0.0, "controller.desired_time_headway", "must be >= 0");
  require(c.gap_margin >= 0.0, "controller.gap_margin", "must be >= 0");
  require(c.max_ramp_members >= 1, "controller.max_ramp_members", "must be >= 1");
  require(c.max_mainline_members >= 0, "controller.max_mainline_members", "must be >= 0");
  require(c.mainline_buffer_offset >= 0.0 &&
              c.mainline_buffer_offset <= geometry.mainline_control_zone_len,
          "controller.mainline_buffer_offset", "must lie within the mainline control zone");
  require(c.hold_distance >= 0.0 &&
              c.hold_distance <= geometry.trigger_point - geometry.ramp_entry(),
          "controller.hold_distance", "must lie between the ramp entry and the trigger point");
  require(c.guard_headway > 0.0, "controller.guard_headway", "must be > 0");
  require(c.leader_kp > 0.0, "controller.leader_kp", "must be > 0");
  require(c.repair_growth > 1.0, "controller.repair_growth", "must be > 1");
  require(c.repair_max_horizon >= c.horizon, "controller.repair_max_horizon",
          "must be >= controller.horizon");
  require(c.activation_margin >= 0.0, "controller.activation_margin", "must be >= 0");
  require(c.check_interval > 0.0, "controller.check_interval", "must be > 0");
  require(c.max_repairs >= 0, "controller.max_repairs", "must be >= 0");
  require(c.density_window > 0.0, "controller.density_window", "must be > 0");
  require(c.sequence_cap >= 1, "controller.sequence_cap", "must be >= 1");
  require(arrival_headway_floor > 0.0, "arrival_headway_floor", "must be > 0");
}

double ScenarioConfig::duration() const {
  double total = 0.0;
  for (const auto& p : phases) total += p.duration;
  return total;
}

const DemandPhase& ScenarioConfig::phase_at(double t) const {
  double end = 0.0;
  for (const auto& p : phases) {
    end += p.duration;
    if (t < end) return p;
  }
  return phases.back();
}

CoordinatorConfig ScenarioConfig::coordinator_config() const {
  CoordinatorConfig c;
  SequencingConfig& s = c.sequencing;
  s.dt = dt;
  s.horizon = controller.horizon;
  s.merge_speed = controller.merge_speed;
  s.desired_time_headway = controller.desired_time_headway;
  s.gap_margin = controller.gap_margin;
  s.limits = limits;
  s.weights = weights;
  s.repair.growth_factor = controller.repair_growth;
  s.repair.max_horizon = controller.repair_max_horizon;
  s.repair.constraints.merge_zone_entry = geometry.merge_zone_entry();
  s.repair.constraints.activation_margin = controller.activation_margin;
  s.fuel = fuel;
  s.cap = controller.sequence_cap;
  c.ramp_idm = ramp_idm;
  c.guard = mainline_idm;
  c.guard.T = controller.guard_headway;
  c.guard.a = limits.acc_max;
  c.leader_gains.kp = controller.leader_kp;
  c.max_ramp_members = controller.max_ramp_members;
  c.max_mainline_members = controller.max_mainline_members;
  c.mainline_buffer_offset = controller.mainline_buffer_offset;
  c.hold_distance = controller.hold_distance;
  c.check_interval = controller.check_interval;
  c.max_repairs = controller.max_repairs;
  c.density_window = controller.density_window;
  c.workers = controller.workers;
  return c;
}

ScenarioConfig table1_scenario(int number, double capacity) {
  ScenarioConfig cfg;
  cfg.ramp_idm.v0 = units::mph_to_mps(33.5);
  auto phase = [&](double main, double ramp) {
    return DemandPhase{600.0, main, ramp, std::max(0.0, capacity - main)};
  };
  switch (number) {
    case 1:
      cfg.name = "scenario1";
      cfg.phases = {phase(1600, 500), phase(1200, 300)};
      break;
    case 2:
      cfg.name = "scenario2";
      cfg.phases = {phase(1600, 300), phase(1200, 500)};
      break;
    default:
      throw std::invalid_argument("unknown scenario " + std::to_string(number));
  }
  return cfg;
}

std::vector<double> generate_arrivals(double demand_veh_h, double t0, double t1,
                                      std::uint64_t seed, double floor) {
  if (demand_veh_h < 0.0) throw std::invalid_argument("demand must be >= 0");
  std::vector<double> out;
  if (demand_veh_h == 0.0 || t1 <= t0) return out;
  const double mean = units::kSecondsPerHour / demand_veh_h;
  const double spread = mean - floor;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  std::mt19937_64 rng(seq);
  std::exponential_distribution<double> expo(spread > 0.0 ? 1.0 / spread : 1.0);
  double t = t0;
  while (true) {
    t += floor + (spread > 0.0 ? expo(rng) : 0.0);
    if (t >= t1) break;
    out.push_back(t);
  }
  return out;
}

GroupMetrics finalize_group(double distance_m, double time_s, double fuel_ml,
                            std::size_t vehicles) {
  GroupMetrics g;
  g.vmt = distance_m / units::kMetersPerMile;
  g.vht = time_s / units::kSecondsPerHour;
  g.q = g.vht > 0.0 ? g.vmt / g.vht : 0.0;
  g.fuel_ml = fuel_ml;
  g.mpg = fuel_ml > 0.0 ? economy_mpg(distance_m, fuel_ml) : 0.0;
  g.vehicles = vehicles;
  return g;
}

void MetricsAccumulator::add(const TrajectoryRow& row, Lane origin) {
  Sums& s = origin == Lane::Ramp ? ramp_ : main_;
  s.distance += row.speed * dt_;
  s.time += dt_;
  s.fuel += row.fuel_rate * dt_;
  if (seen_.insert(row.id).second) ++s.vehicles;
}

RunMetrics MetricsAccumulator::finish() const {
  RunMetrics m;
  m.mainline = finalize_group(main_.distance, main_.time, main_.fuel, main_.vehicles);
  m.ramp = finalize_group(ramp_.distance, ramp_.time, ramp_.fuel, ramp_.vehicles);
  m.overall = finalize_group(main_.distance + ramp_.distance, main_.time + ramp_.time,
                             main_.fuel + ramp_.fuel, main_.vehicles + ramp_.vehicles);
  return m;
}

RunMetrics compute_metrics(const TrajectoryLog& log) {
  MetricsAccumulator acc(log.dt);
  std::unordered_map<VehicleId, Lane> origin;
  // Origin is the lane of the earliest row of each vehicle.
  std::vector<const TrajectoryRow*> order;
  order.reserve(log.rows.size());
  for (const auto& r : log.rows) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return a->t < b->t; });
  for (const auto* r : order) {
    const auto [it, fresh] = origin.emplace(r->id, r->lane);
    acc.add(*r, it->second);
  }
  return acc.finish();
}

namespace {

struct Vehicle {
  VehicleState s;
  Lane origin = Lane::Mainline;
  bool released = false;  // passed a metering green
  double wait = 0.0;      // s spent creeping near the merge-zone end
  double accel = 0.0;
  ControlStatus status = ControlStatus::Uncontrolled;
};

std::uint64_t stream_seed(std::uint64_t seed, int lane, std::size_t phase) {
  // SplitMix-style mixing keeps streams independent across lanes and phases.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (1 + 2 * phase + static_cast<std::uint64_t>(lane));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class World {
 public:
  World(const ScenarioConfig& cfg, const RunOptions& opts) : cfg_(cfg), opts_(opts) {
    double t0 = 0.0;
    for (std::size_t p = 0; p < cfg.phases.size(); ++p) {
      const DemandPhase& ph = cfg.phases[p];
      const double t1 = t0 + ph.duration;
      for (double t : generate_arrivals(ph.mainline_demand, t0, t1, stream_seed(cfg.seed, 0, p),
                                        cfg.arrival_headway_floor)) {
        pending_main_.push_back(t);
      }
      for (double t : generate_arrivals(ph.ramp_demand, t0, t1, stream_seed(cfg.seed, 1, p),
                                        cfg.arrival_headway_floor)) {
        pending_ramp_.push_back(t);
      }
      t0 = t1;
    }
    if (cfg.mode == ControlMode::OptimalControl) {
      coordinator_.emplace(cfg.geometry, cfg.coordinator_config());
    }
    result_.log.dt = cfg.dt;
  }

  RunResult execute() {
    const auto wall0 = std::chrono::steady_clock::now();
    const long steps = std::lround(cfg_.duration() / cfg_.dt);
    MetricsAccumulator metrics(cfg_.dt);
    for (long k = 0; k < steps; ++k) {
      const double t = static_cast<double>(k) * cfg_.dt;
      spawn(t);
      order_lanes();
      compute_accelerations(t);
      yield_to_forced_mergers();
      for (const Vehicle& v : vehicles_) {
        TrajectoryRow row{t, v.s.id, v.s.lane, v.status, v.s.position, v.s.speed, v.accel,
                          fuel_rate(v.s.speed, v.accel, cfg_.fuel)};
        metrics.add(row, v.origin);
        if (opts_.record_log) result_.log.rows.push_back(row);
      }
      integrate(t);
      order_lanes();
      lane_changes();
      check_collisions(t + cfg_.dt);
      remove_exits();
    }
    result_.metrics = metrics.finish();
    result_.stats.final_population = vehicles_.size();
    if (coordinator_) {
      result_.events = coordinator_->events();
      for (const auto& e : result_.events) {
        if (e.kind == "trigger") ++result_.stats.triggers;
        if (e.kind == "repair") ++result_.stats.repairs;
        if (e.kind == "degraded") ++result_.stats.degraded_sets;
      }
    }
    result_.stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return std::move(result_);
  }

 private:
  const IdmParams& lane_idm(const Vehicle& v) const {
    if (v.s.lane == Lane::Ramp && v.s.position < cfg_.geometry.merge_zone_entry()) {
      return cfg_.ramp_idm;
    }
    return cfg_.mainline_idm;
  }

  // Largest speed up to v0 at which IDM needs no more than b of braking.
  static double entry_speed(double gap, double leader_speed, const IdmParams& p) {
    auto ok = [&](double v) { return idm_accel(v, gap, v - leader_speed, p) >= -p.b; };
    if (ok(p.v0)) return p.v0;
    if (!ok(0.0)) return -1.0;
    double lo = 0.0;
    double hi = p.v0;
    for (int i = 0; i < 50; ++i) {
      const double mid = 0.5 * (lo + hi);
      (ok(mid) ? lo : hi) = mid;
    }
    return lo;
  }

  void spawn_lane(std::deque<double>& pending, Lane lane, double t) {
    std::size_t waiting = 0;
    for (double a : pending) {
      if (a > t) break;
      ++waiting;
    }
    result_.stats.max_entry_queue = std::max(result_.stats.max_entry_queue, waiting);
    if (waiting == 0) return;

    const double entry =
        lane == Lane::Mainline ? cfg_.geometry.mainline_entry() : cfg_.geometry.ramp_entry();
    const IdmParams& p = lane == Lane::Mainline ? cfg_.mainline_idm : cfg_.ramp_idm;
    const Vehicle* last = nullptr;
    for (const Vehicle& v : vehicles_) {
      if (v.s.lane == lane && (!last || v.s.position < last->s.position)) last = &v;
    }
    double speed = p.v0;
    if (last) {
      const double gap = net_gap(last->s.position, entry);
      if (gap < p.s0 + 1.0) return;
      speed = entry_speed(gap, last->s.speed, p);
      if (speed < 0.0) return;
    }
    Vehicle v;
    v.s.id = next_id_++;
    v.s.lane = lane;
    v.s.position = entry;
    v.s.speed = speed;
    v.s.initial_speed = speed;
    v.origin = lane;
    vehicles_.push_back(v);
    pending.pop_front();
    ++result_.stats.spawned;
  }

  void spawn(double t) {
    spawn_lane(pending_main_, Lane::Mainline, t);
    spawn_lane(pending_ramp_, Lane::Ramp, t);
  }

  void order_lanes() {
    main_.clear();
    ramp_.clear();
    for (std::size_t i = 0; i < vehicles_.size(); ++i) {
      (vehicles_[i].s.lane == Lane::Mainline ? main_ : ramp_).push_back(i);
    }
    auto downstream_first = [&](std::size_t a, std::size_t b) {
      const auto& va = vehicles_[a].s;
      const auto& vb = vehicles_[b].s;
      if (va.position != vb.position) return va.position > vb.position;
      return va.id < vb.id;
    };
    std::sort(main_.begin(), main_.end(), downstream_first);
    std::sort(ramp_.begin(), ramp_.end(), downstream_first);
  }

  double nominal_accel(const std::vector<std::size_t>& lane, std::size_t rank) const {
    const Vehicle& v = vehicles_[lane[rank]];
    const IdmParams& p = lane_idm(v);
    double acc = kFreeRoad;
    if (rank > 0) {
      const Vehicle& lead = vehicles_[lane[rank - 1]];
      acc = idm_accel(v.s.speed, net_gap(lead.s.position, v.s.position),
                      v.s.speed - lead.s.speed, p);
    } else {
      acc = idm_accel(v.s.speed, kFreeRoad, 0.0, p);
    }
    if (v.s.lane == Lane::Ramp) {
      auto obstacle = [&](double at) {
        const double gap = at - v.s.position;
        if (gap > 0.0) acc = std::min(acc, idm_accel(v.s.speed, gap, v.s.speed, p));
      };
      obstacle(cfg_.geometry.merge_zone_end());
      if (cfg_.mode == ControlMode::RampMetering && !v.released &&
          v.s.position < cfg_.metering.stop_bar) {
        obstacle(cfg_.metering.stop_bar);
      }
    }
    return acc;
  }

  void meter(double t) {
    const DemandPhase& ph = cfg_.phase_at(t);
    if (!(ph.q_suggested > 0.0) || t + 1e-9 < next_green_) return;
    next_green_ += units::kSecondsPerHour / ph.q_suggested;
    if (next_green_ <= t) next_green_ = t + units::kSecondsPerHour / ph.q_suggested;
    for (std::size_t idx : ramp_) {
      Vehicle& v = vehicles_[idx];
      if (v.released || v.s.position >= cfg_.metering.stop_bar) continue;
      if (cfg_.metering.stop_bar - v.s.position <= cfg_.metering.release_range) {
        v.released = true;
        ++result_.stats.metering_releases;
      }
      break;
    }
  }

  void compute_accelerations(double t) {
    if (cfg_.mode == ControlMode::RampMetering) meter(t);
    for (std::size_t r = 0; r < main_.size(); ++r) {
      Vehicle& v = vehicles_[main_[r]];
      v.accel = nominal_accel(main_, r);
      v.status = ControlStatus::Uncontrolled;
    }
    for (std::size_t r = 0; r < ramp_.size(); ++r) {
      Vehicle& v = vehicles_[ramp_[r]];
      v.accel = nominal_accel(ramp_, r);
      v.status = ControlStatus::Uncontrolled;
    }
    if (!coordinator_) return;

    TrafficSnapshot snap;
    snap.time = t;
    snap.dt = cfg_.dt;
    const DemandPhase& ph = cfg_.phase_at(t);
    snap.q_main = units::per_hour_to_per_second(ph.mainline_demand);
    snap.q_suggested = units::per_hour_to_per_second(ph.q_suggested);
    std::unordered_map<VehicleId, double> nominal;
    std::unordered_map<VehicleId, std::size_t> index;
    for (std::size_t idx : main_) snap.mainline.push_back(vehicles_[idx].s);
    for (std::size_t idx : ramp_) snap.ramp.push_back(vehicles_[idx].s);
    for (std::size_t i = 0; i < vehicles_.size(); ++i) {
      nominal[vehicles_[i].s.id] = vehicles_[i].accel;
      index[vehicles_[i].s.id] = i;
      if (coordinator_->ever_controlled(vehicles_[i].s.id)) {
        vehicles_[i].status = ControlStatus::Merged;
      }
    }
    for (const Command& c : coordinator_->step_control(snap, nominal)) {
      Vehicle& v = vehicles_[index.at(c.id)];
      v.accel = c.accel;
      v.status = c.status;
      ++result_.stats.coordinator_commands;
    }
  }

  bool forcing(const Vehicle& v) const {
    return v.s.lane == Lane::Ramp && v.s.position >= cfg_.geometry.merge_zone_entry() &&
           v.wait >= cfg_.merging.forced_wait;
  }

  // A ramp vehicle that has waited out the timeout creeps in: the nearest
  // mainline vehicle upstream treats it as its leader.
  void yield_to_forced_mergers() {
    for (std::size_t idx : ramp_) {
      const Vehicle& m = vehicles_[idx];
      if (!forcing(m)) continue;
      Vehicle* follow = nullptr;
      for (std::size_t j : main_) {
        if (vehicles_[j].s.position < m.s.position) {
          follow = &vehicles_[j];
          break;
        }
      }
      if (!follow) continue;
      // Stop short by s0 so the merger's own gap test can pass.
      const double gap = net_gap(m.s.position, follow->s.position) - cfg_.mainline_idm.s0;
      if (gap <= 0.0) continue;
      follow->accel = std::min(follow->accel, std::max(cfg_.limits.acc_min * 2.0,
                                                       idm_accel(follow->s.speed, gap,
                                                                 follow->s.speed - m.s.speed,
                                                                 cfg_.mainline_idm)));
    }
  }

  void integrate(double t) {
    const double trigger = cfg_.geometry.trigger_point;
    for (Vehicle& v : vehicles_) {
      const double before = v.s.position;
      const Kinematics next = advance(v.s.position, v.s.speed, v.accel, cfg_.dt);
      v.s.position = next.position;
      v.s.speed = next.speed;
      v.s.accel = v.accel;
      if (v.origin == Lane::Ramp && before < trigger && next.position >= trigger) {
        const double frac = (trigger - before) / (next.position - before);
        result_.trigger_crossings.push_back(t + frac * cfg_.dt);
      }
      const double end = cfg_.geometry.merge_zone_end();
      if (v.s.lane == Lane::Ramp && v.s.position >= end - cfg_.merging.forced_zone &&
          v.s.speed < cfg_.merging.creep_speed) {
        v.wait += cfg_.dt;
      }
    }
  }

  bool acceptable(const Vehicle& m, const Vehicle* lead, const Vehicle* follow, double limit) const {
    const IdmParams& p = cfg_.mainline_idm;
    if (lead) {
      const double gap = net_gap(lead->s.position, m.s.position);
      if (gap <= p.s0) return false;
      if (idm_accel(m.s.speed, gap, m.s.speed - lead->s.speed, p) < -limit) return false;
    }
    if (follow) {
      const double gap = net_gap(m.s.position, follow->s.position);
      if (gap <= p.s0) return false;
      if (idm_accel(follow->s.speed, gap, follow->s.speed - m.s.speed, p) < -limit) return false;
    }
    return true;
  }

  void lane_changes() {
    for (std::size_t idx : ramp_) {
      Vehicle& v = vehicles_[idx];
      if (v.s.position < cfg_.geometry.merge_zone_entry()) continue;
      // Insertion point in the downstream-first mainline order.
      std::size_t pos = 0;
      while (pos < main_.size() && vehicles_[main_[pos]].s.position > v.s.position) ++pos;
      const Vehicle* lead = pos > 0 ? &vehicles_[main_[pos - 1]] : nullptr;
      const Vehicle* follow = pos < main_.size() ? &vehicles_[main_[pos]] : nullptr;
      const bool coordinated = v.status == ControlStatus::OptimalControlled;
      bool merge = acceptable(v, lead, follow,
                              coordinated ? cfg_.merging.forced_decel : cfg_.merging.accept_decel);
      if (!merge && forcing(v) &&
          acceptable(v, lead, follow, cfg_.merging.forced_decel)) {
        merge = true;
        ++result_.stats.forced_merges;
      }
      if (!merge) continue;
      v.s.lane = Lane::Mainline;
      main_.insert(main_.begin() + static_cast<std::ptrdiff_t>(pos), idx);
    }
    std::erase_if(ramp_, [&](std::size_t idx) { return vehicles_[idx].s.lane != Lane::Ramp; });
  }

  [[noreturn]] void collision(double t, const Vehicle& lead, const Vehicle& follow) const {
    std::ostringstream os;
    os << "collision at t=" << t << " s: vehicle " << follow.s.id << " ("
       << to_string(follow.s.lane) << ", x=" << follow.s.position << ") reached vehicle "
       << lead.s.id << " (x=" << lead.s.position << "), net gap "
       << net_gap(lead.s.position, follow.s.position) << " m, mode " << to_string(cfg_.mode)
       << ", seed " << cfg_.seed;
    throw CollisionError(os.str(), lead.s.id, follow.s.id);
  }

  void check_collisions(double t) const {
    for (const auto* lane : {&main_, &ramp_}) {
      for (std::size_t r = 1; r < lane->size(); ++r) {
        const Vehicle& lead = vehicles_[(*lane)[r - 1]];
        const Vehicle& follow = vehicles_[(*lane)[r]];
        if (net_gap(lead.s.position, follow.s.position) <= 0.0) collision(t, lead, follow);
      }
    }
    const double end = cfg_.geometry.merge_zone_end();
    for (std::size_t idx : ramp_) {
      const Vehicle& v = vehicles_[idx];
      if (v.s.position > end + 1e-9) {
        std::ostringstream os;
        os << "vehicle " << v.s.id << " overran the merge-zone end at t=" << t << " s (x="
           << v.s.position << ")";
        throw CollisionError(os.str(), 0, v.s.id);
      }
    }
  }

  void remove_exits() {
    const double exit = cfg_.geometry.network_exit();
    const auto before = vehicles_.size();
    std::erase_if(vehicles_, [&](const Vehicle& v) {
      return v.s.lane == Lane::Mainline && v.s.position >= exit;
    });
    result_.stats.exited += before - vehicles_.size();
  }

  const ScenarioConfig& cfg_;
  RunOptions opts_;
  std::deque<double> pending_main_;
  std::deque<double> pending_ramp_;
  std::vector<Vehicle> vehicles_;
  std::vector<std::size_t> main_;
  std::vector<std::size_t> ramp_;
  std::optional<MergeCoordinator> coordinator_;
  VehicleId next_id_ = 1;
  double next_green_ = 0.0;
  RunResult result_;
};

}  // namespace

RunResult run(const ScenarioConfig& config, const RunOptions& options) {
  config.validate();
  World world(config, options);
  return world.execute();
}

InflowWindow worst_inflow_window(const std::vector<double>& crossings, const ScenarioConfig& config,
                                 double window) {
  std::vector<double> sorted = crossings;
  std::sort(sorted.begin(), sorted.end());
  const double total = config.duration();
  // Integral of q_suggested (veh/s) over [a, b].
  auto allowed = [&](double a, double b) {
    double acc = 0.0;
    double start = 0.0;
    for (const auto& ph : config.phases) {
      const double end = start + ph.duration;
      const double lo = std::max(a, start);
      const double hi = std::min(b, end);
      if (hi > lo) acc += (hi - lo) * units::per_hour_to_per_second(ph.q_suggested);
      start = end;
    }
    return acc;
  };
  InflowWindow worst;
  const long windows = std::lround((total - window) / config.dt);
  for (long k = 0; k <= windows; ++k) {
    const double s = static_cast<double>(k) * config.dt;
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), s);
    const auto hi = std::lower_bound(sorted.begin(), sorted.end(), s + window);
    const auto count = static_cast<std::size_t>(hi - lo);
    const double a = allowed(s, s + window);
    const double ratio = a > 0.0 ? static_cast<double>(count) / a : (count ? kFreeRoad : 0.0);
    if (k == 0 || ratio > worst.ratio) worst = {s, count, a, ratio};
  }
  return worst;
}

}  // namespace rampmerge
