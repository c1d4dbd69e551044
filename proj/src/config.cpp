#include "rampmerge/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <type_traits>
#include <vector>

#include <json.hpp>

namespace rampmerge {

namespace {

using nlohmann::json;

struct UnitFactor {
  const char* dimension;
  const char* unit;
  double factor;  // multiply to get the library unit
};

// Demands are held in veh/h inside the library.
constexpr UnitFactor kUnits[] = {
    {"length", "m", 1.0},
    {"length", "km", 1000.0},
    {"length", "ft", units::kMetersPerFoot},
    {"length", "mi", units::kMetersPerMile},
    {"time", "s", 1.0},
    {"time", "min", 60.0},
    {"time", "h", 3600.0},
    {"speed", "m/s", 1.0},
    {"speed", "km/h", 1.0 / 3.6},
    {"speed", "mph", units::kMetersPerMile / units::kSecondsPerHour},
    {"speed", "ft/s", units::kMetersPerFoot},
    {"accel", "m/s2", 1.0},
    {"accel", "m/s^2", 1.0},
    {"accel", "ft/s2", units::kMetersPerFoot},
    {"accel", "ft/s^2", units::kMetersPerFoot},
    {"flow", "veh/h", 1.0},
    {"flow", "veh/min", 60.0},
    {"flow", "veh/s", 3600.0},
};

std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  void num(const char* key, double& value, const char* dimension = "") {
    const json* v = take(key);
    if (!v) return;
    const std::string field = join_path(path_, key);
    double x = 0.0;
    if (v->is_number()) {
      x = v->get<double>();
    } else if (v->is_string()) {
      try {
        x = parse_quantity(v->get<std::string>(), dimension);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(field, e.what());
      }
    } else {
      throw ConfigError(field, "expected a number or a quantity string");
    }
    if (!std::isfinite(x)) throw ConfigError(field, "must be finite");
    value = x;
  }

  template <class T>
  void integer(const char* key, T& value) {
    const json* v = take(key);
    if (!v) return;
    const std::string field = join_path(path_, key);
    if (!v->is_number()) throw ConfigError(field, "expected an integer");
    if (v->is_number_float()) {
      const double d = v->get<double>();
      if (d != std::floor(d)) throw ConfigError(field, "expected an integer");
    }
    if constexpr (std::is_unsigned_v<T>) {
      if (v->is_number_integer() && !v->is_number_unsigned() && v->get<std::int64_t>() < 0) {
        throw ConfigError(field, "must be >= 0");
      }
      const auto u = v->get<std::uint64_t>();
      if (u > std::numeric_limits<T>::max()) throw ConfigError(field, "out of range");
      value = static_cast<T>(u);
    } else {
      const auto s = v->get<std::int64_t>();
      if (s < std::numeric_limits<T>::min() || s > std::numeric_limits<T>::max()) {
        throw ConfigError(field, "out of range");
      }
      value = static_cast<T>(s);
    }
  }

  void flag(const char* key, bool& value) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_boolean()) throw ConfigError(join_path(path_, key), "expected true or false");
    value = v->get<bool>();
  }

  void text(const char* key, std::string& value) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_string()) throw ConfigError(join_path(path_, key), "expected a string");
    value = v->get<std::string>();
  }

  void mode(const char* key, ControlMode& value) {
    std::string s;
    text(key, s);
    if (s.empty()) return;
    try {
      value = mode_from_string(s);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(join_path(path_, key), e.what());
    }
  }

  template <class F>
  void section(const char* key, F&& bind) {
    const json* v = take(key);
    if (!v) return;
    Reader child(*v, join_path(path_, key));
    bind(child);
    child.finish();
  }

  template <class T, class F>
  void list(const char* key, std::vector<T>& items, F&& bind) {
    const json* v = take(key);
    if (!v) return;
    const std::string field = join_path(path_, key);
    if (!v->is_array()) throw ConfigError(field, "expected an array");
    items.assign(v->size(), T{});
    for (std::size_t i = 0; i < v->size(); ++i) {
      Reader child((*v)[i], field + "[" + std::to_string(i) + "]");
      bind(child, items[i]);
      child.finish();
    }
  }

  const json* take(const char* key) {
    seen_.insert(key);
    const auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) throw ConfigError(join_path(path_, key), "unknown key");
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

class Writer {
 public:
  void num(const char* key, double& value, const char* = "") { out_[key] = value; }
  template <class T>
  void integer(const char* key, T& value) { out_[key] = value; }
  void flag(const char* key, bool& value) { out_[key] = value; }
  void text(const char* key, std::string& value) { out_[key] = value; }
  void mode(const char* key, ControlMode& value) { out_[key] = std::string(to_string(value)); }

  template <class F>
  void section(const char* key, F&& bind) {
    Writer child;
    bind(child);
    out_[key] = std::move(child.out_);
  }

  template <class T, class F>
  void list(const char* key, std::vector<T>& items, F&& bind) {
    json arr = json::array();
    for (T& item : items) {
      Writer child;
      bind(child, item);
      arr.push_back(std::move(child.out_));
    }
    out_[key] = std::move(arr);
  }

  json out_ = json::object();
};

template <class B>
void bind_idm(B& b, IdmParams& p) {
  b.num("v0", p.v0, "speed");
  b.num("s0", p.s0, "length");
  b.num("T", p.T, "time");
  b.num("a", p.a, "accel");
  b.num("b", p.b, "accel");
  b.num("delta", p.delta);
}

template <class B>
void bind(B& b, ScenarioConfig& c) {
  b.text("name", c.name);
  b.mode("mode", c.mode);
  b.integer("seed", c.seed);
  b.num("dt", c.dt, "time");
  b.num("arrival_headway_floor", c.arrival_headway_floor, "time");

  b.section("geometry", [&](auto& s) {
    MergeGeometry& g = c.geometry;
    s.num("ramp_control_zone_len", g.ramp_control_zone_len, "length");
    s.num("ramp_buffer_zone_len", g.ramp_buffer_zone_len, "length");
    s.num("mainline_control_zone_len", g.mainline_control_zone_len, "length");
    s.num("merge_zone_len", g.merge_zone_len, "length");
    s.num("trigger_point", g.trigger_point, "length");
    s.num("mainline_upstream_len", g.mainline_upstream_len, "length");
    s.num("mainline_downstream_len", g.mainline_downstream_len, "length");
    s.num("ramp_len", g.ramp_len, "length");
  });

  b.list("phases", c.phases, [](auto& s, DemandPhase& p) {
    s.num("duration", p.duration, "time");
    s.num("mainline_demand", p.mainline_demand, "flow");
    s.num("ramp_demand", p.ramp_demand, "flow");
    s.num("q_suggested", p.q_suggested, "flow");
  });

  b.section("limits", [&](auto& s) {
    s.num("acc_min", c.limits.acc_min, "accel");
    s.num("acc_max", c.limits.acc_max, "accel");
    s.num("gap_min_headway", c.limits.gap_min_headway, "time");
  });

  b.section("weights", [&](auto& s) {
    WeightConfig& w = c.weights;
    s.num("gap_weight_mainline", w.gap_weight_mainline);
    s.num("gap_weight_ramp", w.gap_weight_ramp);
    s.num("speed_weight_mainline", w.speed_weight_mainline);
    s.num("speed_weight_ramp", w.speed_weight_ramp);
    s.num("input_weight", w.input_weight);
    s.num("terminal_scale", w.terminal_scale);
  });

  b.section("mainline_idm", [&](auto& s) { bind_idm(s, c.mainline_idm); });
  b.section("ramp_idm", [&](auto& s) { bind_idm(s, c.ramp_idm); });

  b.section("fuel", [&](auto& s) {
    FuelCoefficients& f = c.fuel;
    s.num("b0", f.b0);
    s.num("b1", f.b1);
    s.num("b2", f.b2);
    s.num("b3", f.b3);
    s.num("c0", f.c0);
    s.num("c1", f.c1);
    s.num("c2", f.c2);
  });

  b.section("metering", [&](auto& s) {
    s.num("stop_bar", c.metering.stop_bar, "length");
    s.num("release_range", c.metering.release_range, "length");
  });

  b.section("merging", [&](auto& s) {
    MergeBehaviour& m = c.merging;
    s.num("accept_decel", m.accept_decel, "accel");
    s.num("forced_decel", m.forced_decel, "accel");
    s.num("forced_wait", m.forced_wait, "time");
    s.num("creep_speed", m.creep_speed, "speed");
    s.num("forced_zone", m.forced_zone, "length");
  });

  b.section("controller", [&](auto& s) {
    ControllerParams& p = c.controller;
    s.integer("horizon", p.horizon);
    s.num("merge_speed", p.merge_speed, "speed");
    s.num("desired_time_headway", p.desired_time_headway, "time");
    s.num("gap_margin", p.gap_margin, "length");
    s.integer("max_ramp_members", p.max_ramp_members);
    s.integer("max_mainline_members", p.max_mainline_members);
    s.num("mainline_buffer_offset", p.mainline_buffer_offset, "length");
    s.num("hold_distance", p.hold_distance, "length");
    s.num("guard_headway", p.guard_headway, "time");
    s.num("leader_kp", p.leader_kp);
    s.num("repair_growth", p.repair_growth);
    s.integer("repair_max_horizon", p.repair_max_horizon);
    s.num("activation_margin", p.activation_margin, "length");
    s.num("check_interval", p.check_interval, "time");
    s.integer("max_repairs", p.max_repairs);
    s.num("density_window", p.density_window, "time");
    s.integer("sequence_cap", p.sequence_cap);
    s.integer("workers", p.workers);
  });
}

// "limits.acc_min must be < 0" -> field "limits.acc_min", message "must be < 0".
ConfigError as_config_error(const std::invalid_argument& e) {
  const std::string msg = e.what();
  const auto space = msg.find(' ');
  if (space == std::string::npos) return ConfigError("<config>", msg);
  return ConfigError(msg.substr(0, space), msg.substr(space + 1));
}

}  // namespace

double parse_quantity(const std::string& text, const std::string& dimension) {
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(*begin))) ++begin;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc()) throw std::invalid_argument("'" + text + "' does not start with a number");
  std::string unit(ptr, end);
  unit.erase(0, unit.find_first_not_of(" \t"));
  unit.erase(unit.find_last_not_of(" \t") + 1);
  if (unit.empty()) return value;
  std::string known;
  for (const UnitFactor& u : kUnits) {
    if (dimension != u.dimension) continue;
    if (unit == u.unit) return value * u.factor;
    known += known.empty() ? u.unit : std::string(", ") + u.unit;
  }
  if (known.empty()) throw std::invalid_argument("takes a plain number, got unit '" + unit + "'");
  throw std::invalid_argument("unknown " + dimension + " unit '" + unit + "' (expected " + known + ")");
}

ScenarioConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("<root>", "expected an object");

  ScenarioConfig config;
  if (const auto base = doc.find("base"); base != doc.end()) {
    if (!base->is_number_integer() || (base->get<int>() != 1 && base->get<int>() != 2)) {
      throw ConfigError("base", "must be 1 or 2");
    }
    config = table1_scenario(base->get<int>());
  }
  Reader reader(doc, "");
  reader.take("base");
  bind(reader, config);
  reader.finish();

  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw as_config_error(e);
  }
  return config;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ScenarioConfig& config) {
  ScenarioConfig copy = config;
  Writer writer;
  bind(writer, copy);
  return writer.out_.dump(2) + "\n";
}

std::string config_hash(const ScenarioConfig& config) {
  std::uint64_t h = 14695981039346656037ull;
  for (const unsigned char ch : serialize_config(config)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

}  // namespace rampmerge
