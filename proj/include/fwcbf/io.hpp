#ifndef FWCBF_IO_HPP
#define FWCBF_IO_HPP

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "fwcbf/simulation.hpp"

namespace fwcbf::io {

using json = nlohmann::json;

/// Shortest representation that parses back to the same double; always
/// '.' as decimal separator regardless of locale.
inline std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  return value;
}

// ---------------------------------------------------------------------------
// Scenario config <-> JSON

inline json to_json(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["dt"] = c.dt;
  j["duration"] = c.duration;
  j["seed"] = c.seed;
  j["mode"] = to_string(c.mode);
  j["filter_enabled"] = c.filter_enabled;
  j["record_pairs"] = c.record_pairs;
  j["sensor_range"] = c.sensor_range;
  j["limits"] = {{"v_min", c.limits.v_min},
                 {"v_max", c.limits.v_max},
                 {"omega_max", c.limits.omega_max},
                 {"zeta_max", c.limits.zeta_max}};
  j["barrier"] = {
      {"kind", to_string(c.barrier.kind)},
      {"turn",
       {{"sigma", c.barrier.turn.sigma},
        {"speed", c.barrier.turn.speed},
        {"turn_rate", c.barrier.turn.turn_rate}}},
      {"straight",
       {{"v1", c.barrier.straight.v1},
        {"v2", c.barrier.straight.v2},
        {"zeta1", c.barrier.straight.zeta1},
        {"zeta2", c.barrier.straight.zeta2}}},
      {"safety",
       {{"delta", c.barrier.safety.delta},
        {"safe_distance", c.barrier.safety.safe_distance}}}};
  j["shaping"] = {{"enabled", c.shaping.enabled}, {"beta", c.shaping.beta}};
  if (c.shaping.xi) {
    j["shaping"]["xi"] = *c.shaping.xi;
  } else {
    j["shaping"]["xi"] = "auto";
  }
  j["alpha"] = {{"kind", "linear"}, {"slope", c.alpha.slope}};
  j["gains"] = {{"heading", c.gains.heading}, {"radial", c.gains.radial}};
  j["vehicles"] = json::array();
  for (const VehicleSpec& v : c.vehicles) {
    json jv;
    jv["initial"] = {{"px", v.initial.px},
                     {"py", v.initial.py},
                     {"heading", v.initial.heading},
                     {"pz", v.initial.pz}};
    const NominalSpec& n = v.nominal;
    json jn;
    jn["kind"] = to_string(n.kind);
    jn["speed"] = n.speed;
    switch (n.kind) {
      case NominalSpec::Kind::goal:
        jn["goal"] = {n.goal_x, n.goal_y};
        jn["arrival_time"] =
            n.arrival_time ? json(*n.arrival_time) : json(nullptr);
        break;
      case NominalSpec::Kind::circle:
        jn["center"] = {n.center_x, n.center_y};
        jn["radius"] = n.radius;
        jn["direction"] = n.direction;
        break;
      case NominalSpec::Kind::constant:
        jn["constant"] = {{"speed", n.constant.speed},
                          {"turn_rate", n.constant.turn_rate},
                          {"climb_rate", n.constant.climb_rate}};
        break;
    }
    jv["nominal"] = jn;
    j["vehicles"].push_back(jv);
  }
  return j;
}

namespace detail {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

/// Parses a scenario. Missing keys keep their defaults; type mismatches and
/// unknown enumerators throw std::invalid_argument.
inline ScenarioConfig scenario_from_json(const json& j) {
  try {
    ScenarioConfig c;
    detail::read(j, "name", c.name);
    detail::read(j, "dt", c.dt);
    detail::read(j, "duration", c.duration);
    detail::read(j, "seed", c.seed);
    if (j.contains("mode")) c.mode = filter_mode_from_string(j.at("mode").get<std::string>());
    detail::read(j, "filter_enabled", c.filter_enabled);
    detail::read(j, "record_pairs", c.record_pairs);
    detail::read(j, "sensor_range", c.sensor_range);
    if (j.contains("limits")) {
      const json& l = j.at("limits");
      detail::read(l, "v_min", c.limits.v_min);
      detail::read(l, "v_max", c.limits.v_max);
      detail::read(l, "omega_max", c.limits.omega_max);
      detail::read(l, "zeta_max", c.limits.zeta_max);
    }
    if (j.contains("barrier")) {
      const json& b = j.at("barrier");
      if (b.contains("kind")) {
        c.barrier.kind = barrier_kind_from_string(b.at("kind").get<std::string>());
      }
      if (b.contains("turn")) {
        const json& t = b.at("turn");
        detail::read(t, "sigma", c.barrier.turn.sigma);
        detail::read(t, "speed", c.barrier.turn.speed);
        detail::read(t, "turn_rate", c.barrier.turn.turn_rate);
      }
      if (b.contains("straight")) {
        const json& s = b.at("straight");
        detail::read(s, "v1", c.barrier.straight.v1);
        detail::read(s, "v2", c.barrier.straight.v2);
        detail::read(s, "zeta1", c.barrier.straight.zeta1);
        detail::read(s, "zeta2", c.barrier.straight.zeta2);
      }
      if (b.contains("safety")) {
        const json& s = b.at("safety");
        detail::read(s, "delta", c.barrier.safety.delta);
        detail::read(s, "safe_distance", c.barrier.safety.safe_distance);
      }
    }
    if (j.contains("shaping")) {
      const json& s = j.at("shaping");
      detail::read(s, "enabled", c.shaping.enabled);
      detail::read(s, "beta", c.shaping.beta);
      if (s.contains("xi")) {
        const json& xi = s.at("xi");
        if (xi.is_string()) {
          if (xi.get<std::string>() != "auto") {
            throw std::invalid_argument("shaping.xi must be a number or \"auto\"");
          }
          c.shaping.xi.reset();
        } else {
          c.shaping.xi = xi.get<double>();
        }
      }
    }
    if (j.contains("alpha")) {
      const json& a = j.at("alpha");
      if (a.contains("kind") && a.at("kind").get<std::string>() != "linear") {
        throw std::invalid_argument("alpha.kind must be \"linear\"");
      }
      detail::read(a, "slope", c.alpha.slope);
    }
    if (j.contains("gains")) {
      detail::read(j.at("gains"), "heading", c.gains.heading);
      detail::read(j.at("gains"), "radial", c.gains.radial);
    }
    if (j.contains("vehicles")) {
      for (const json& jv : j.at("vehicles")) {
        VehicleSpec v;
        const json& s = jv.at("initial");
        detail::read(s, "px", v.initial.px);
        detail::read(s, "py", v.initial.py);
        detail::read(s, "heading", v.initial.heading);
        detail::read(s, "pz", v.initial.pz);
        if (jv.contains("nominal")) {
          const json& n = jv.at("nominal");
          NominalSpec& ns = v.nominal;
          if (n.contains("kind")) ns.kind = nominal_kind_from_string(n.at("kind").get<std::string>());
          detail::read(n, "speed", ns.speed);
          if (n.contains("goal")) {
            ns.goal_x = n.at("goal").at(0).get<double>();
            ns.goal_y = n.at("goal").at(1).get<double>();
          }
          if (n.contains("arrival_time") && !n.at("arrival_time").is_null()) {
            ns.arrival_time = n.at("arrival_time").get<double>();
          }
          if (n.contains("center")) {
            ns.center_x = n.at("center").at(0).get<double>();
            ns.center_y = n.at("center").at(1).get<double>();
          }
          detail::read(n, "radius", ns.radius);
          detail::read(n, "direction", ns.direction);
          if (n.contains("constant")) {
            const json& k = n.at("constant");
            detail::read(k, "speed", ns.constant.speed);
            detail::read(k, "turn_rate", ns.constant.turn_rate);
            detail::read(k, "climb_rate", ns.constant.climb_rate);
          }
        }
        c.vehicles.push_back(v);
      }
    }
    return c;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

// ---------------------------------------------------------------------------
// Outputs

inline json to_json(const Metrics& m) {
  json j;
  j["min_distance"] = m.min_distance;
  j["min_h"] = m.min_h;
  j["min_h_tilde"] = m.min_h_tilde;
  j["max_control_jump"] = m.max_control_jump;
  j["onset_jump"] = m.onset_jump ? json(*m.onset_jump) : json(nullptr);
  j["median_jump"] = m.median_jump;
  j["fallback_events"] = m.fallback_events;
  j["domain_errors"] = m.domain_errors;
  j["safety_violation"] = m.safety_violation;
  j["closest_approach"] = json::array();
  for (const PairApproach& p : m.closest_approach) {
    j["closest_approach"].push_back(
        {{"i", p.i}, {"j", p.j}, {"min_distance", p.min_distance}, {"time", p.time}});
  }
  return j;
}

inline constexpr const char* kTraceHeader =
    "t,vehicle,px,py,heading,pz,nominal_speed,nominal_turn_rate,"
    "nominal_climb_rate,speed,turn_rate,climb_rate,min_h_tilde";

/// One row per step per vehicle.
inline void write_trace_csv(std::ostream& out, const SimTrace& trace) {
  out << kTraceHeader << '\n';
  for (const StepRecord& s : trace.steps) {
    for (std::size_t v = 0; v < s.states.size(); ++v) {
      const VehicleState& x = s.states[v];
      const ControlInput& n = s.nominal[v];
      const ControlInput& u = s.filtered[v];
      out << format_double(s.time) << ',' << v << ',' << format_double(x.px)
          << ',' << format_double(x.py) << ',' << format_double(x.heading)
          << ',' << format_double(x.pz) << ',' << format_double(n.speed) << ','
          << format_double(n.turn_rate) << ',' << format_double(n.climb_rate)
          << ',' << format_double(u.speed) << ',' << format_double(u.turn_rate)
          << ',' << format_double(u.climb_rate) << ','
          << format_double(s.min_h_tilde) << '\n';
    }
  }
}

inline void write_events_log(std::ostream& out, const SimTrace& trace) {
  for (const SimEvent& e : trace.events) {
    out << format_double(e.time) << ' ' << e.kind << " vehicles=";
    for (std::size_t k = 0; k < e.vehicles.size(); ++k) {
      out << (k ? "," : "") << e.vehicles[k];
    }
    out << ' ' << e.message << '\n';
  }
}

struct SweepRow {
  double range = 0.0;
  double min_distance = 0.0;
  double min_h_tilde = 0.0;
};

inline constexpr const char* kSweepHeader = "R,min_distance,min_h_tilde,r_min";

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows,
                            double r_min) {
  out << kSweepHeader << '\n';
  for (const SweepRow& r : rows) {
    out << format_double(r.range) << ',' << format_double(r.min_distance) << ','
        << format_double(r.min_h_tilde) << ',' << format_double(r_min) << '\n';
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

inline std::vector<SweepRow> read_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kSweepHeader) {
    throw std::invalid_argument("sweep.csv: bad header");
  }
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) throw std::invalid_argument("sweep.csv: bad row");
    rows.push_back({parse_double(cells[0]), parse_double(cells[1]),
                    parse_double(cells[2])});
  }
  return rows;
}

/// Writes via a temporary file and rename so readers never see a partial file.
template <typename Writer>
void write_atomically(const std::filesystem::path& path, Writer&& writer) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    writer(out);
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace fwcbf::io

#endif  // FWCBF_IO_HPP
