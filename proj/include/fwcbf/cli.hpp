#ifndef FWCBF_CLI_HPP
#define FWCBF_CLI_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <future>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "fwcbf/io.hpp"
#include "fwcbf/sensor_shaping.hpp"
#include "fwcbf/simulation.hpp"

namespace fwcbf::cli {

enum ExitCode : int {
  kOk = 0,
  kBadConfig = 1,
  kSafetyViolation = 2,
  kNotCompatible = 3,
};

/// What to run and where to write it. Overrides replace the scenario value.
struct RunManifest {
  std::optional<std::string> scenario;
  std::optional<std::filesystem::path> config;
  std::filesystem::path out_dir = ".";
  std::optional<double> range;
  std::optional<double> xi;
  std::optional<double> beta;
  std::optional<double> alpha;
  std::optional<double> dt;
  std::optional<std::string> mode;
  std::optional<std::string> barrier;
  std::optional<bool> shaping;
  std::optional<std::uint64_t> seed;
  std::size_t samples = 100000;
};

inline ScenarioConfig resolve_scenario(const RunManifest& m) {
  if (m.scenario && m.config) {
    throw std::invalid_argument("give either --scenario or --config, not both");
  }
  ScenarioConfig cfg;
  if (m.config) {
    cfg = io::load_scenario(*m.config);
  } else {
    cfg = builtin_scenario(m.scenario.value_or("sweep"), m.range.value_or(350.0));
  }
  if (m.range) cfg.sensor_range = *m.range;
  if (m.xi) cfg.shaping.xi = *m.xi;
  if (m.beta) cfg.shaping.beta = *m.beta;
  if (m.alpha) cfg.alpha.slope = *m.alpha;
  if (m.dt) cfg.dt = *m.dt;
  if (m.mode) cfg.mode = filter_mode_from_string(*m.mode);
  if (m.barrier) cfg.barrier.kind = barrier_kind_from_string(*m.barrier);
  if (m.shaping) cfg.shaping.enabled = *m.shaping;
  if (m.seed) cfg.seed = *m.seed;
  return cfg;
}

/// trace.csv, metrics.json, events.log. Exit 2 when the minimum distance
/// dropped below D_s, 1 on a bad config.
inline int cmd_run(const RunManifest& m, std::ostream& log) {
  ScenarioConfig cfg;
  RunResult result;
  try {
    cfg = resolve_scenario(m);
    make_filter_config(cfg);
    std::filesystem::create_directories(m.out_dir);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kBadConfig;
  }
  result = run_scenario(cfg);
  io::write_atomically(m.out_dir / "trace.csv", [&](std::ostream& out) {
    io::write_trace_csv(out, result.trace);
  });
  io::write_atomically(m.out_dir / "metrics.json", [&](std::ostream& out) {
    out << io::to_json(result.metrics).dump(2) << '\n';
  });
  io::write_atomically(m.out_dir / "events.log", [&](std::ostream& out) {
    io::write_events_log(out, result.trace);
  });
  log << cfg.name << ": min_distance=" << io::format_double(result.metrics.min_distance)
      << " min_h_tilde=" << io::format_double(result.metrics.min_h_tilde)
      << " fallbacks=" << result.metrics.fallback_events << '\n';
  return result.metrics.safety_violation ? kSafetyViolation : kOk;
}

/// Runs the scenario once per range on a worker pool; writes sweep.csv.
inline int cmd_sweep(const RunManifest& m, const std::vector<double>& ranges,
                     std::ostream& log) {
  if (ranges.empty()) {
    log << "error: empty range list\n";
    return kBadConfig;
  }
  std::vector<ScenarioConfig> configs;
  try {
    for (double r : ranges) {
      RunManifest point = m;
      point.range = r;
      configs.push_back(resolve_scenario(point));
      make_filter_config(configs.back());
    }
    std::filesystem::create_directories(m.out_dir);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kBadConfig;
  }

  std::vector<io::SweepRow> rows(configs.size());
  std::vector<bool> violation(configs.size(), false);
  const std::size_t workers =
      std::max<std::size_t>(1, std::thread::hardware_concurrency());
  for (std::size_t start = 0; start < configs.size(); start += workers) {
    std::vector<std::future<RunResult>> batch;
    const std::size_t end = std::min(configs.size(), start + workers);
    for (std::size_t k = start; k < end; ++k) {
      ScenarioConfig c = configs[k];
      c.record_pairs = false;
      batch.push_back(std::async(std::launch::async, [c] { return run_scenario(c); }));
    }
    for (std::size_t k = start; k < end; ++k) {
      const RunResult r = batch[k - start].get();
      rows[k] = {configs[k].sensor_range, r.metrics.min_distance,
                 r.metrics.min_h_tilde};
      violation[k] = r.metrics.safety_violation;
    }
  }

  const ScenarioConfig& base = configs.front();
  const double r_min = min_sensing_range(base.barrier.turn, base.barrier.safety);
  io::write_atomically(m.out_dir / "sweep.csv", [&](std::ostream& out) {
    io::write_sweep_csv(out, rows, r_min);
  });
  log << "r_min=" << io::format_double(r_min) << '\n';
  for (const auto& r : rows) {
    log << "R=" << io::format_double(r.range)
        << " min_distance=" << io::format_double(r.min_distance)
        << " min_h_tilde=" << io::format_double(r.min_h_tilde) << '\n';
  }
  return std::find(violation.begin(), violation.end(), true) != violation.end()
             ? kSafetyViolation
             : kOk;
}

/// Prints the minimum sensing range, xi, beta and psi coefficients, then
/// samples states outside the sensed set. Exit 0 iff sensor compatible.
inline int cmd_check(const RunManifest& m, std::ostream& log) {
  ScenarioConfig cfg;
  try {
    cfg = resolve_scenario(m);
    cfg.barrier.safety.validate();
    if (cfg.barrier.kind == BarrierKind::turn) cfg.barrier.turn.validate();
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kBadConfig;
  }
  const SensorModel sensor{cfg.sensor_range};
  const double r_min = min_sensing_range(cfg.barrier.turn, cfg.barrier.safety);
  log << "barrier=" << to_string(cfg.barrier.kind) << '\n';
  log << "R=" << io::format_double(sensor.range) << '\n';
  log << "R_min=" << io::format_double(r_min) << '\n';

  double xi = 1.0;
  bool derived = false;
  if (cfg.shaping.xi) {
    xi = *cfg.shaping.xi;
  } else if (cfg.barrier.kind == BarrierKind::turn) {
    try {
      xi = xi_from_range(sensor.range, cfg.barrier.turn, cfg.barrier.safety);
      derived = true;
    } catch (const std::invalid_argument& e) {
      log << "no positive xi exists for this range; probing with xi="
          << io::format_double(xi) << '\n';
    }
  }
  ShapingParams shaping;
  try {
    shaping = make_quadratic_psi(xi, cfg.shaping.beta);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kBadConfig;
  }
  log << "xi=" << io::format_double(shaping.xi) << (derived ? " (from range)" : "")
      << '\n';
  log << "beta=" << io::format_double(shaping.beta) << '\n';
  log << "psi c1=" << io::format_double(shaping.c1)
      << " c2=" << io::format_double(shaping.c2)
      << " c3=" << io::format_double(shaping.c3) << '\n';

  const CompatibilityReport report = check_sensor_compatible(
      cfg.barrier, shaping, sensor, m.samples, cfg.seed);
  log << "samples=" << report.samples_checked << '\n';
  if (report.ok) {
    log << "sensor compatible: yes\n";
    return kOk;
  }
  const CompatibilityWitness& w = *report.witness;
  log << "sensor compatible: no\n";
  log << "witness: a=(" << io::format_double(w.pair.a.px) << ", "
      << io::format_double(w.pair.a.py) << ", "
      << io::format_double(w.pair.a.heading) << ") b=("
      << io::format_double(w.pair.b.px) << ", " << io::format_double(w.pair.b.py)
      << ", " << io::format_double(w.pair.b.heading)
      << ") distance=" << io::format_double(std::sqrt(squared_planar_distance(w.pair)))
      << " h=" << io::format_double(w.h) << '\n';
  return kNotCompatible;
}

}  // namespace fwcbf::cli

#endif  // FWCBF_CLI_HPP
