#include "rampmerge/export.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rampmerge {

namespace {

using nlohmann::ordered_json;

std::string fixed(double v, int decimals = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  // Avoid "-0.000000" so equal values print identically.
  std::string s = buf;
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw std::runtime_error(where + ": bad number '" + s + "'");
  return v;
}

ordered_json group_json(const GroupMetrics& g) {
  ordered_json j;
  j["q_mph"] = g.q;
  j["q_mps"] = units::mph_to_mps(g.q);
  j["mpg"] = g.mpg;
  // litres per 100 km
  j["l_per_100km"] = g.mpg > 0.0 ? 100.0 * units::kMillilitersPerGallon / (g.mpg * units::kMetersPerMile)
                                 : 0.0;
  j["vmt"] = g.vmt;
  j["vht"] = g.vht;
  j["distance_m"] = g.vmt * units::kMetersPerMile;
  j["time_s"] = g.vht * units::kSecondsPerHour;
  j["fuel_ml"] = g.fuel_ml;
  j["vehicles"] = g.vehicles;
  return j;
}

struct GroupRef {
  const char* name;
  const GroupMetrics RunMetrics::*member;
};

constexpr GroupRef kGroups[] = {
    {"overall", &RunMetrics::overall},
    {"mainline", &RunMetrics::mainline},
    {"ramp", &RunMetrics::ramp},
};

std::uint64_t fnv1a(std::istream& in) {
  std::uint64_t h = 14695981039346656037ull;
  char buf[8192];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace

void write_trajectories(const TrajectoryLog& log, std::ostream& out) {
  std::vector<const TrajectoryRow*> rows;
  rows.reserve(log.rows.size());
  for (const auto& r : log.rows) rows.push_back(&r);
  std::stable_sort(rows.begin(), rows.end(), [](const auto* a, const auto* b) {
    return a->t != b->t ? a->t < b->t : a->id < b->id;
  });
  out << kTrajectoryHeader << '\n';
  for (const auto* r : rows) {
    out << fixed(r->t) << ',' << r->id << ',' << to_string(r->lane) << ',' << fixed(r->position)
        << ',' << fixed(r->speed) << ',' << fixed(r->accel) << ',' << to_string(r->status) << ','
        << fixed(r->fuel_rate) << '\n';
  }
}

void export_trajectories(const TrajectoryLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_trajectories(log, out);
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

TrajectoryLog import_trajectories(const std::filesystem::path& path, std::optional<double> dt) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kTrajectoryHeader) {
    throw std::runtime_error(path.string() + ": missing trajectory header");
  }
  TrajectoryLog log;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto cells = split_csv(line);
    if (cells.size() != 8) throw std::runtime_error(where + ": expected 8 columns");
    TrajectoryRow r;
    try {
      r.t = to_double(cells[0], where);
      r.id = std::stoll(cells[1]);
      r.lane = lane_from_string(cells[2]);
      r.position = to_double(cells[3], where);
      r.speed = to_double(cells[4], where);
      r.accel = to_double(cells[5], where);
      r.status = status_from_string(cells[6]);
      r.fuel_rate = to_double(cells[7], where);
    } catch (const std::runtime_error&) {
      throw;
    } catch (const std::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
    log.rows.push_back(r);
  }
  if (dt) {
    log.dt = *dt;
  } else {
    double step = 0.0;
    for (std::size_t i = 1; i < log.rows.size(); ++i) {
      const double d = log.rows[i].t - log.rows[i - 1].t;
      if (d > 1e-9 && (step == 0.0 || d < step)) step = d;
    }
    // Timestamps carry 6 decimals; snap the step back to that grid.
    log.dt = step > 0.0 ? std::round(step * 1e6) / 1e6 : 0.1;
  }
  return log;
}

double improvement_percent(double value, double baseline) {
  if (baseline == 0.0) return 0.0;
  return (value - baseline) / baseline * 100.0;
}

std::string report_json(const std::vector<ModeResult>& results, const std::string& title) {
  ordered_json doc;
  doc["title"] = title;
  ordered_json modes = ordered_json::object();
  for (const auto& r : results) {
    ordered_json m;
    for (const auto& g : kGroups) m[g.name] = group_json(r.metrics.*g.member);
    modes[std::string(to_string(r.mode))] = m;
  }
  doc["modes"] = modes;
  ordered_json imp = ordered_json::object();
  if (!results.empty()) {
    const ModeResult& ref = results.front();
    doc["reference_mode"] = std::string(to_string(ref.mode));
    for (std::size_t i = 1; i < results.size(); ++i) {
      ordered_json per;
      for (const auto& g : kGroups) {
        const GroupMetrics& a = ref.metrics.*g.member;
        const GroupMetrics& b = results[i].metrics.*g.member;
        per[g.name] = {{"q_percent", improvement_percent(a.q, b.q)},
                       {"mpg_percent", improvement_percent(a.mpg, b.mpg)}};
      }
      imp[std::string(to_string(results[i].mode))] = per;
    }
  }
  doc["improvement_over"] = imp;
  return doc.dump(2) + "\n";
}

std::string report_table(const std::vector<ModeResult>& results, const std::string& title) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{"Group", "Metric"};
  for (const auto& r : results) head.emplace_back(to_string(r.mode));
  for (std::size_t i = 1; i < results.size(); ++i) {
    head.push_back("vs " + std::string(to_string(results[i].mode)));
  }
  rows.push_back(head);

  const char* labels[] = {"Overall", "Mainline", "Ramp"};
  for (std::size_t gi = 0; gi < std::size(kGroups); ++gi) {
    const auto member = kGroups[gi].member;
    for (int metric = 0; metric < 2; ++metric) {
      auto pick = [&](const ModeResult& r) {
        const GroupMetrics& g = r.metrics.*member;
        return metric == 0 ? g.q : g.mpg;
      };
      std::vector<std::string> row{labels[gi], metric == 0 ? "Q (mph)" : "Economy (mpg)"};
      for (const auto& r : results) row.push_back(fixed(pick(r), 2));
      for (std::size_t i = 1; i < results.size(); ++i) {
        const double p = improvement_percent(pick(results.front()), pick(results[i]));
        row.push_back((p >= 0.0 ? "+" : "") + fixed(p, 1) + "%");
      }
      rows.push_back(row);
    }
  }

  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  if (!title.empty()) out << title << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::size_t pad = width[c] - row[c].size();
      if (c < 2) {
        out << row[c] << std::string(pad, ' ');
      } else {
        out << std::string(pad, ' ') << row[c];
      }
      out << (c + 1 < row.size() ? "  " : "");
    }
    out << '\n';
  }
  return out.str();
}

void report_metrics(const std::vector<ModeResult>& results, const std::filesystem::path& stem,
                    const std::string& title) {
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for " + p.string());
  };
  std::filesystem::path json_path = stem;
  json_path += ".json";
  std::filesystem::path txt_path = stem;
  txt_path += ".txt";
  write(json_path, report_json(results, title));
  write(txt_path, report_table(results, title));
}

std::string manifest_json(const RunManifest& m) {
  ordered_json j;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["mode"] = std::string(to_string(m.mode));
  j["started"] = m.started;
  j["finished"] = m.finished;
  j["outputs"] = m.outputs;
  ordered_json metrics;
  for (const auto& g : kGroups) metrics[g.name] = group_json(m.metrics.*g.member);
  j["metrics"] = metrics;
  return j.dump(2) + "\n";
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(in)));
  return hex;
}

}  // namespace rampmerge
