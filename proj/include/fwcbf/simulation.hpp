#ifndef FWCBF_SIMULATION_HPP
#define FWCBF_SIMULATION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fwcbf/barrier.hpp"
#include "fwcbf/safety_filter.hpp"
#include "fwcbf/sensor_shaping.hpp"
#include "fwcbf/vehicle_dynamics.hpp"

namespace fwcbf {

// ---------------------------------------------------------------------------
// Nominal controllers

struct ControllerGains {
  double heading = 1.0;  // turn rate per radian of heading error, 1/s
  double radial = 0.05;  // circle tracking, 1/m
};

/// Tracks a circle of the given radius; direction +1 is counter-clockwise.
inline ControlInput nominal_circle_controller(const VehicleState& state,
                                              double center_x, double center_y,
                                              double radius, int direction,
                                              double speed,
                                              const ActuatorLimits& limits,
                                              const ControllerGains& gains = {}) {
  if (!(radius > 0.0)) {
    throw std::invalid_argument("nominal_circle_controller: radius must be positive");
  }
  const double dir = direction >= 0 ? 1.0 : -1.0;
  const double rx = state.px - center_x;
  const double ry = state.py - center_y;
  const double dist = std::hypot(rx, ry);
  const double feedforward = dir * speed / radius;
  if (dist == 0.0) {
    return clamp_input({speed, feedforward, 0.0}, limits);
  }
  const double radial_angle = std::atan2(ry, rx);
  const double tangent = radial_angle + dir * 0.5 * std::numbers::pi;
  const double desired =
      tangent + dir * std::atan(gains.radial * (dist - radius));
  const double error = wrap_angle(desired - state.heading);
  return clamp_input({speed, feedforward + gains.heading * error, 0.0}, limits);
}

/// Turns toward the goal. With an arrival time the speed is chosen to cover
/// the remaining distance in the remaining time; once late, v_max.
inline ControlInput nominal_goal_controller(
    const VehicleState& state, double goal_x, double goal_y, double cruise_speed,
    const ActuatorLimits& limits, std::optional<double> arrival_time = {},
    double now = 0.0, const ControllerGains& gains = {}) {
  const double dx = goal_x - state.px;
  const double dy = goal_y - state.py;
  const double dist = std::hypot(dx, dy);
  if (dist == 0.0) return clamp_input({cruise_speed, 0.0, 0.0}, limits);
  const double error = wrap_angle(std::atan2(dy, dx) - state.heading);
  double speed = cruise_speed;
  if (arrival_time) {
    const double remaining = *arrival_time - now;
    speed = remaining > 0.0 ? dist / remaining : limits.v_max;
  }
  return clamp_input({speed, gains.heading * error, 0.0}, limits);
}

struct NominalSpec {
  enum class Kind { goal, circle, constant };
  Kind kind = Kind::goal;
  // goal
  double goal_x = 0.0;
  double goal_y = 0.0;
  std::optional<double> arrival_time;
  // circle
  double center_x = 0.0;
  double center_y = 0.0;
  double radius = 100.0;
  int direction = 1;
  // goal cruise / circle speed
  double speed = 20.0;
  // constant
  ControlInput constant;
};

inline std::string to_string(NominalSpec::Kind k) {
  switch (k) {
    case NominalSpec::Kind::goal: return "goal";
    case NominalSpec::Kind::circle: return "circle";
    default: return "constant";
  }
}

inline NominalSpec::Kind nominal_kind_from_string(const std::string& s) {
  if (s == "goal") return NominalSpec::Kind::goal;
  if (s == "circle") return NominalSpec::Kind::circle;
  if (s == "constant") return NominalSpec::Kind::constant;
  throw std::invalid_argument("unknown nominal controller: " + s);
}

struct VehicleSpec {
  VehicleState initial;
  NominalSpec nominal;
};

// ---------------------------------------------------------------------------
// Scenario description

struct ShapingConfig {
  bool enabled = true;
  double beta = 0.9;
  std::optional<double> xi;  // empty: largest xi provable for the range
};

struct ScenarioConfig {
  std::string name = "custom";
  std::vector<VehicleSpec> vehicles;
  ActuatorLimits limits;
  BarrierConfig barrier;
  double sensor_range = 350.0;
  ShapingConfig shaping;
  ClassKappaGain alpha;
  ControllerGains gains;
  double dt = 0.05;
  double duration = 60.0;
  FilterMode mode = FilterMode::centralized;
  bool filter_enabled = true;
  bool record_pairs = true;
  std::uint64_t seed = 42;
};

/// Validates the config and resolves the shaping parameters.
inline FilterConfig make_filter_config(const ScenarioConfig& cfg) {
  if (cfg.vehicles.empty()) {
    throw std::invalid_argument("scenario: at least one vehicle required");
  }
  if (!(cfg.dt > 0.0) || !(cfg.duration > 0.0)) {
    throw std::invalid_argument("scenario: dt and duration must be positive");
  }
  if (!cfg.limits.valid()) {
    throw std::invalid_argument("scenario: invalid actuator limits");
  }
  if (!(cfg.sensor_range > 0.0)) {
    throw std::invalid_argument("scenario: sensor range must be positive");
  }
  if (!(cfg.alpha.slope > 0.0)) {
    throw std::invalid_argument("scenario: alpha slope must be positive");
  }
  for (const auto& v : cfg.vehicles) {
    if (!v.initial.finite()) {
      throw std::invalid_argument("scenario: non-finite initial state");
    }
  }
  cfg.barrier.safety.validate();
  if (cfg.barrier.kind == BarrierKind::turn) {
    cfg.barrier.turn.validate();
  } else {
    cfg.barrier.straight.validate();
  }

  FilterConfig fc;
  fc.barrier = cfg.barrier;
  fc.sensor = SensorModel{cfg.sensor_range};
  fc.alpha = cfg.alpha;
  fc.limits = cfg.limits;
  fc.mode = cfg.mode;
  if (cfg.shaping.enabled) {
    double xi = 0.0;
    if (cfg.shaping.xi) {
      xi = *cfg.shaping.xi;
    } else {
      if (cfg.barrier.kind != BarrierKind::turn) {
        throw std::invalid_argument(
            "scenario: automatic xi requires the turn barrier");
      }
      xi = xi_from_range(cfg.sensor_range, cfg.barrier.turn, cfg.barrier.safety);
    }
    fc.shaping = make_quadratic_psi(xi, cfg.shaping.beta);
  }
  return fc;
}

// ---------------------------------------------------------------------------
// Trace and metrics

struct StepRecord {
  double time = 0.0;
  std::vector<VehicleState> states;  // at the start of the step
  std::vector<ControlInput> nominal;
  std::vector<ControlInput> filtered;
  double min_distance = 0.0;  // over all pairs, true state
  double min_h = 0.0;         // raw barrier over all pairs
  double min_h_tilde = 0.0;   // shaped barrier (raw when shaping is off)
  bool any_sensed = false;
  std::vector<PairRecord> sensed_pairs;
};

struct SimEvent {
  double time = 0.0;
  std::string kind;
  std::vector<std::size_t> vehicles;
  std::string message;
};

struct SimTrace {
  std::vector<StepRecord> steps;
  std::vector<SimEvent> events;
  std::vector<VehicleState> final_states;
};

struct PairApproach {
  std::size_t i = 0;
  std::size_t j = 0;
  double min_distance = std::numeric_limits<double>::infinity();
  double time = 0.0;
};

struct Metrics {
  double min_distance = std::numeric_limits<double>::infinity();
  double min_h = std::numeric_limits<double>::infinity();
  double min_h_tilde = std::numeric_limits<double>::infinity();
  std::vector<double> max_control_jump;  // per vehicle
  std::vector<PairApproach> closest_approach;
  /// Control jump at the first step some pair enters the sensed set, and
  /// the median over all steps of the largest per-vehicle jump.
  std::optional<double> onset_jump;
  double median_jump = 0.0;
  std::size_t fallback_events = 0;
  std::size_t domain_errors = 0;
  bool safety_violation = false;  // distance below D_s at some step
};

// ---------------------------------------------------------------------------
// World stepping

struct World {
  double time = 0.0;
  std::vector<VehicleState> states;
};

inline ControlInput nominal_control(const VehicleSpec& spec,
                                    const VehicleState& state, double now,
                                    const ScenarioConfig& cfg) {
  const NominalSpec& n = spec.nominal;
  switch (n.kind) {
    case NominalSpec::Kind::goal:
      return nominal_goal_controller(state, n.goal_x, n.goal_y, n.speed,
                                     cfg.limits, n.arrival_time, now,
                                     cfg.gains);
    case NominalSpec::Kind::circle:
      return nominal_circle_controller(state, n.center_x, n.center_y, n.radius,
                                       n.direction, n.speed, cfg.limits,
                                       cfg.gains);
    default:
      return clamp_input(n.constant, cfg.limits);
  }
}

namespace detail {

struct PairScan {
  double min_distance = std::numeric_limits<double>::infinity();
  double min_h = std::numeric_limits<double>::infinity();
  double min_h_tilde = std::numeric_limits<double>::infinity();
};

inline PairScan scan_pairs(const std::vector<VehicleState>& states,
                           const FilterConfig& fc,
                           std::vector<PairApproach>* approaches, double now) {
  PairScan scan;
  std::size_t k = 0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (std::size_t j = i + 1; j < states.size(); ++j, ++k) {
      const PairState pair{states[i], states[j]};
      const double d = std::sqrt(squared_planar_distance(pair));
      scan.min_distance = std::min(scan.min_distance, d);
      if (approaches && d < (*approaches)[k].min_distance) {
        (*approaches)[k].min_distance = d;
        (*approaches)[k].time = now;
      }
      double h = -std::numeric_limits<double>::infinity();
      try {
        h = evaluate_h(pair, fc.barrier).value;
      } catch (const DomainError&) {
      } catch (const std::invalid_argument&) {
        continue;
      }
      scan.min_h = std::min(scan.min_h, h);
      const double ht = fc.shaping ? shape_h(h, *fc.shaping) : h;
      scan.min_h_tilde = std::min(scan.min_h_tilde, ht);
    }
  }
  return scan;
}

}  // namespace detail

/// Nominal controls, safety filter, clamp, RK4 for every vehicle. Appends
/// one record to the trace.
inline World step_world(const World& world, const ScenarioConfig& cfg,
                        const FilterConfig& fc, SimTrace& trace) {
  const std::size_t count = world.states.size();
  StepRecord rec;
  rec.time = world.time;
  rec.states = world.states;
  rec.nominal.resize(count);
  for (std::size_t v = 0; v < count; ++v) {
    rec.nominal[v] = nominal_control(cfg.vehicles[v], world.states[v],
                                     world.time, cfg);
  }

  if (cfg.filter_enabled && count > 1) {
    FilterResult fr = filter_controls(world.states, rec.nominal, fc);
    rec.filtered = std::move(fr.controls);
    rec.any_sensed = !fr.sensed_pairs.empty();
    if (cfg.record_pairs) rec.sensed_pairs = std::move(fr.sensed_pairs);
    for (auto& e : fr.events) {
      trace.events.push_back(
          {world.time,
           e.kind == FilterEvent::Kind::fallback ? "fallback" : "domain_error",
           std::move(e.vehicles), std::move(e.message)});
    }
  } else {
    rec.filtered.resize(count);
    for (std::size_t v = 0; v < count; ++v) {
      rec.filtered[v] = clamp_input(rec.nominal[v], cfg.limits);
    }
    for (std::size_t i = 0; i < count && !rec.any_sensed; ++i) {
      for (std::size_t j = i + 1; j < count; ++j) {
        if (in_sensor_set({world.states[i], world.states[j]}, fc.sensor)) {
          rec.any_sensed = true;
          break;
        }
      }
    }
  }

  const detail::PairScan scan = detail::scan_pairs(world.states, fc, nullptr, 0.0);
  rec.min_distance = scan.min_distance;
  rec.min_h = scan.min_h;
  rec.min_h_tilde = scan.min_h_tilde;

  World next;
  next.states.resize(count);
  for (std::size_t v = 0; v < count; ++v) {
    next.states[v] = step_rk4(world.states[v], rec.filtered[v], cfg.dt);
  }
  trace.steps.push_back(std::move(rec));
  next.time = world.time + cfg.dt;
  return next;
}

inline double control_jump(const ControlInput& a, const ControlInput& b) {
  const double dv = a.speed - b.speed;
  const double dw = a.turn_rate - b.turn_rate;
  const double dz = a.climb_rate - b.climb_rate;
  return std::sqrt(dv * dv + dw * dw + dz * dz);
}

inline Metrics compute_metrics(const SimTrace& trace, const ScenarioConfig& cfg,
                               const FilterConfig& fc) {
  Metrics m;
  const std::size_t count = cfg.vehicles.size();
  m.max_control_jump.assign(count, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = i + 1; j < count; ++j) {
      m.closest_approach.push_back({i, j});
    }
  }

  std::vector<double> step_jumps;
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const StepRecord& s = trace.steps[k];
    detail::scan_pairs(s.states, fc, &m.closest_approach, s.time);
    m.min_distance = std::min(m.min_distance, s.min_distance);
    m.min_h = std::min(m.min_h, s.min_h);
    m.min_h_tilde = std::min(m.min_h_tilde, s.min_h_tilde);
    if (k == 0) continue;
    double jump = 0.0;
    for (std::size_t v = 0; v < count; ++v) {
      const double j = control_jump(s.filtered[v], trace.steps[k - 1].filtered[v]);
      m.max_control_jump[v] = std::max(m.max_control_jump[v], j);
      jump = std::max(jump, j);
    }
    step_jumps.push_back(jump);
    if (!m.onset_jump && s.any_sensed && !trace.steps[k - 1].any_sensed) {
      m.onset_jump = jump;
    }
  }
  // final state counts for the distance metrics too
  if (!trace.final_states.empty()) {
    const detail::PairScan last = detail::scan_pairs(
        trace.final_states, fc, &m.closest_approach,
        trace.steps.empty() ? 0.0 : trace.steps.back().time + cfg.dt);
    m.min_distance = std::min(m.min_distance, last.min_distance);
  }
  if (!step_jumps.empty()) {
    const auto mid = step_jumps.begin() + static_cast<std::ptrdiff_t>(step_jumps.size() / 2);
    std::nth_element(step_jumps.begin(), mid, step_jumps.end());
    m.median_jump = *mid;
  }
  for (const SimEvent& e : trace.events) {
    if (e.kind == "fallback") ++m.fallback_events;
    if (e.kind == "domain_error") ++m.domain_errors;
  }
  if (count < 2) m.min_distance = std::numeric_limits<double>::infinity();
  m.safety_violation = m.min_distance < cfg.barrier.safety.safe_distance;
  return m;
}

struct RunResult {
  SimTrace trace;
  Metrics metrics;
};

inline std::size_t step_count(const ScenarioConfig& cfg) {
  return static_cast<std::size_t>(std::llround(cfg.duration / cfg.dt));
}

/// Runs duration / dt steps and computes metrics. Invalid configs are
/// rejected with std::invalid_argument before any step is taken.
inline RunResult run_scenario(const ScenarioConfig& cfg) {
  const FilterConfig fc = make_filter_config(cfg);
  World world;
  for (const auto& v : cfg.vehicles) {
    VehicleState s = v.initial;
    s.heading = wrap_angle(s.heading);
    world.states.push_back(s);
  }
  RunResult out;
  const std::size_t steps = step_count(cfg);
  out.trace.steps.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    world = step_world(world, cfg, fc, out.trace);
    world.time = static_cast<double>(k + 1) * cfg.dt;
  }
  out.trace.final_states = world.states;
  out.metrics = compute_metrics(out.trace, cfg, fc);
  return out;
}

// ---------------------------------------------------------------------------
// Builtin scenarios

namespace scenarios {

inline constexpr double kDegree = std::numbers::pi / 180.0;

/// Vehicle limits and turn maneuver of the fixed-wing experiments:
/// v in [15, 25] m/s, 13 deg/s, maneuver v = 0.9 v_min + 0.1 v_max,
/// omega = 0.9 omega_max, sigma = 1, delta = 0.01, D_s = 5.
inline ScenarioConfig fixed_wing_base() {
  ScenarioConfig cfg;
  cfg.limits = ActuatorLimits{15.0, 25.0, 13.0 * kDegree, 5.0};
  cfg.barrier.kind = BarrierKind::turn;
  cfg.barrier.turn = TurnManeuver{
      1.0, 0.9 * cfg.limits.v_min + 0.1 * cfg.limits.v_max,
      0.9 * cfg.limits.omega_max};
  cfg.barrier.straight = StraightManeuver{
      0.9 * cfg.limits.v_min + 0.1 * cfg.limits.v_max,
      0.1 * cfg.limits.v_min + 0.9 * cfg.limits.v_max, 0.0, 0.0};
  cfg.barrier.safety = SafetyParams{0.01, 5.0};
  cfg.dt = 0.01;
  return cfg;
}

/// Two vehicles circling toward a head-on configuration they cannot sense
/// in time; raw straight barrier, nominal control outside the sensed set.
inline ScenarioConfig example1(double sensor_range = 20.0) {
  ScenarioConfig cfg = fixed_wing_base();
  cfg.name = "example1";
  cfg.barrier.kind = BarrierKind::straight;
  cfg.shaping.enabled = false;
  cfg.sensor_range = sensor_range;
  const double v = cfg.barrier.turn.speed;
  const double w = cfg.barrier.turn.turn_rate;
  const double r = v / w;
  const double half = sensor_range / 2.0;
  VehicleSpec a;
  a.initial = {r + half, r, -std::numbers::pi / 2.0, 0.0};
  a.nominal.kind = NominalSpec::Kind::circle;
  a.nominal.center_x = half;
  a.nominal.center_y = r;
  a.nominal.radius = r;
  a.nominal.direction = -1;
  a.nominal.speed = v;
  VehicleSpec b;
  b.initial = {-r - half, r, -std::numbers::pi / 2.0, 0.0};
  b.nominal = a.nominal;
  b.nominal.center_x = -half;
  b.nominal.direction = 1;
  cfg.vehicles = {a, b};
  cfg.duration = 15.0;
  return cfg;
}

/// Head-on approach that first senses the other vehicle where the raw turn
/// barrier is already near zero. With `shaped`, the range is raised above
/// the minimum sensing range and the sensor-compatible barrier is used.
inline ScenarioConfig example2(bool shaped = false, double epsilon = 1.0) {
  ScenarioConfig cfg = fixed_wing_base();
  cfg.name = shaped ? "example2_shaped" : "example2";
  cfg.barrier.turn = TurnManeuver{1.0, cfg.limits.v_min, cfg.limits.omega_max};
  const double ds = cfg.barrier.safety.safe_distance;
  const double delta = cfg.barrier.safety.delta;
  const double r = cfg.limits.v_min / cfg.limits.omega_max;
  const double eta = std::asin(r / (r + ds / 2.0));
  double start = 0.0;
  if (shaped) {
    cfg.shaping.enabled = true;
    cfg.sensor_range = 300.0;
    start = cfg.sensor_range / 2.0 + epsilon;
  } else {
    cfg.shaping.enabled = false;
    cfg.sensor_range = (ds + 2.0 * r) * std::cos(eta) + 4.0 * delta;
    start = (ds / 2.0 + r) * std::cos(eta) + 2.0 * delta + epsilon;
  }
  VehicleSpec a;
  a.initial = {start, 0.0, std::numbers::pi, 0.0};
  a.nominal.kind = NominalSpec::Kind::constant;
  a.nominal.constant = {cfg.limits.v_max, 0.0, 0.0};
  VehicleSpec b = a;
  b.initial = {-start, 0.0, 0.0, 0.0};
  cfg.vehicles = {a, b};
  cfg.duration = 20.0;
  return cfg;
}

/// Two vehicles swapping positions along the x axis.
inline ScenarioConfig two_vehicle_sweep(double sensor_range) {
  ScenarioConfig cfg = fixed_wing_base();
  cfg.name = "sweep";
  cfg.sensor_range = sensor_range;
  VehicleSpec a;
  a.initial = {-200.0, 0.0, 0.0, 0.0};
  a.nominal.kind = NominalSpec::Kind::goal;
  a.nominal.goal_x = 200.0;
  a.nominal.speed = 20.0;
  VehicleSpec b = a;
  b.initial = {200.0, 0.0, std::numbers::pi, 0.0};
  b.nominal.goal_x = -200.0;
  cfg.vehicles = {a, b};
  cfg.duration = 30.0;
  return cfg;
}

/// Twenty vehicles evenly spaced on a circle, all timed to reach the origin
/// together.
inline ScenarioConfig circle20(double sensor_range = 350.0,
                               double start_radius = 1250.0,
                               std::size_t count = 20) {
  ScenarioConfig cfg = fixed_wing_base();
  cfg.name = "circle20";
  cfg.sensor_range = sensor_range;
  cfg.record_pairs = false;
  const double cruise = 20.0;
  for (std::size_t k = 0; k < count; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(count);
    VehicleSpec v;
    v.initial = {start_radius * std::cos(angle), start_radius * std::sin(angle),
                 wrap_angle(angle + std::numbers::pi), 0.0};
    v.nominal.kind = NominalSpec::Kind::goal;
    v.nominal.goal_x = 0.0;
    v.nominal.goal_y = 0.0;
    v.nominal.speed = cruise;
    v.nominal.arrival_time = start_radius / cruise;
    cfg.vehicles.push_back(v);
  }
  cfg.duration = 100.0;
  return cfg;
}

}  // namespace scenarios

inline std::vector<std::string> builtin_scenario_names() {
  return {"example1", "example2", "sweep", "circle20"};
}

/// Builtin scenario by name; `sweep` uses `sweep_range`.
inline ScenarioConfig builtin_scenario(const std::string& name,
                                       double sweep_range = 350.0) {
  if (name == "example1") return scenarios::example1();
  if (name == "example2") return scenarios::example2(false);
  if (name == "example2_shaped") return scenarios::example2(true);
  if (name == "sweep") return scenarios::two_vehicle_sweep(sweep_range);
  if (name == "circle20") return scenarios::circle20();
  throw std::invalid_argument("unknown scenario: " + name);
}

inline std::map<std::string, ScenarioConfig> builtin_scenarios(
    double sweep_range = 350.0) {
  std::map<std::string, ScenarioConfig> out;
  for (const auto& name : builtin_scenario_names()) {
    out.emplace(name, builtin_scenario(name, sweep_range));
  }
  return out;
}

}  // namespace fwcbf

#endif  // FWCBF_SIMULATION_HPP
