#ifndef FWCBF_SAFETY_FILTER_HPP
#define FWCBF_SAFETY_FILTER_HPP

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fwcbf/barrier.hpp"
#include "fwcbf/qp.hpp"
#include "fwcbf/sensor_shaping.hpp"
#include "fwcbf/vehicle_dynamics.hpp"

namespace fwcbf {

enum class FilterMode { centralized, split };

inline std::string to_string(FilterMode mode) {
  return mode == FilterMode::centralized ? "centralized" : "split";
}

inline FilterMode filter_mode_from_string(const std::string& name) {
  if (name == "centralized") return FilterMode::centralized;
  if (name == "split") return FilterMode::split;
  throw std::invalid_argument("unknown filter mode: " + name);
}

struct FilterConfig {
  BarrierConfig barrier;
  /// When disengaged the raw barrier h is used as-is inside the sensed set.
  std::optional<ShapingParams> shaping;
  SensorModel sensor;
  ClassKappaGain alpha;
  ActuatorLimits limits;
  FilterMode mode = FilterMode::centralized;
};

/// Barrier constraint of one sensed pair over the pair's stacked control:
/// lg . [u_a; u_b] + offset >= 0.
struct PairConstraint {
  PairControlRow lg = PairControlRow::Zero();
  double offset = 0.0;
  double h = 0.0;
  double h_tilde = 0.0;

  bool vacuous() const { return lg.isZero(0.0); }
  double margin(const PairControl& u) const { return lg.dot(u) + offset; }
};

/// Constraint for a pair, or nothing when the pair is outside the sensed
/// set (every control is admissible there). Throws DomainError when the
/// barrier cannot be evaluated.
inline std::optional<PairConstraint> assemble_pair_constraint(
    const PairState& pair, const FilterConfig& config) {
  if (!in_sensor_set(pair, config.sensor)) return std::nullopt;
  PairConstraint c;
  if (config.shaping) {
    const ShapedLieDerivatives s =
        shaped_lie_derivatives(pair, config.barrier, *config.shaping);
    c.lg = s.lg;
    c.h = s.h;
    c.h_tilde = s.h_tilde;
    c.offset = s.lf + config.alpha(s.h_tilde);
  } else {
    const LieDerivatives raw = lie_derivatives(pair, config.barrier);
    c.lg = raw.lg;
    c.h = raw.h.value;
    c.h_tilde = raw.h.value;
    c.offset = raw.lf + config.alpha(raw.h.value);
  }
  return c;
}

struct PairRecord {
  std::size_t i = 0;
  std::size_t j = 0;
  double h = 0.0;
  double h_tilde = 0.0;
  double margin = 0.0;  // at the filtered control
};

struct FilterEvent {
  enum class Kind { fallback, domain_error };
  Kind kind = Kind::fallback;
  std::vector<std::size_t> vehicles;
  std::string message;
};

struct FilterResult {
  std::vector<ControlInput> controls;
  std::vector<PairRecord> sensed_pairs;
  std::vector<FilterEvent> events;
};

namespace detail {

struct SensedPair {
  std::size_t i;
  std::size_t j;
  PairConstraint constraint;
};

inline Eigen::Vector3d to_vector(const ControlInput& u) {
  return {u.speed, u.turn_rate, u.climb_rate};
}

inline ControlInput to_control(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return {v(0), v(1), v(2)};
}

inline void set_box(QPProblem& qp, std::size_t vehicles,
                    const ActuatorLimits& lim) {
  const Eigen::Index n = static_cast<Eigen::Index>(3 * vehicles);
  qp.lower.resize(n);
  qp.upper.resize(n);
  for (std::size_t v = 0; v < vehicles; ++v) {
    const Eigen::Index k = static_cast<Eigen::Index>(3 * v);
    qp.lower.segment<3>(k) << lim.v_min, -lim.omega_max, -lim.zeta_max;
    qp.upper.segment<3>(k) << lim.v_max, lim.omega_max, lim.zeta_max;
  }
}

}  // namespace detail

/// Filters nominal controls through the barrier QP.
///
/// centralized: one QP over all stacked controls with one row per sensed
/// pair. split: one QP per vehicle; the row of pair (i, j) given to vehicle
/// i is lg_i u_i - lg_i g_i + (lg_i g_i + lg_j g_j + offset) / 2 >= 0, with
/// g the evading maneuver, so the two halves add up to the pair row and
/// each half is satisfied by the evading maneuver itself.
/// On infeasibility (or a domain error) the affected vehicles fly the
/// evading maneuver, clamped into the actuator box.
inline FilterResult filter_controls(const std::vector<VehicleState>& world,
                                    const std::vector<ControlInput>& nominal,
                                    const FilterConfig& config) {
  if (world.size() != nominal.size()) {
    throw std::invalid_argument("filter_controls: size mismatch");
  }
  const std::size_t count = world.size();
  const auto evading = evading_controls(config.barrier);

  FilterResult result;
  result.controls.resize(count);
  for (std::size_t v = 0; v < count; ++v) {
    result.controls[v] = clamp_input(nominal[v], config.limits);
  }

  std::vector<detail::SensedPair> sensed;
  std::vector<bool> forced(count, false);
  std::vector<std::optional<ControlInput>> fallback(count);
  auto assign_fallback = [&](std::size_t v, const ControlInput& g) {
    if (!fallback[v]) fallback[v] = clamp_input(g, config.limits);
  };

  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = i + 1; j < count; ++j) {
      const PairState pair{world[i], world[j]};
      try {
        if (auto c = assemble_pair_constraint(pair, config)) {
          sensed.push_back({i, j, *c});
        }
      } catch (const DomainError& e) {
        forced[i] = forced[j] = true;
        assign_fallback(i, evading[0]);
        assign_fallback(j, evading[1]);
        result.events.push_back(
            {FilterEvent::Kind::domain_error, {i, j}, e.what()});
      }
    }
  }

  if (config.mode == FilterMode::centralized) {
    QPProblem qp;
    qp.u_hat.resize(static_cast<Eigen::Index>(3 * count));
    for (std::size_t v = 0; v < count; ++v) {
      qp.u_hat.segment<3>(static_cast<Eigen::Index>(3 * v)) =
          detail::to_vector(result.controls[v]);
    }
    detail::set_box(qp, count, config.limits);
    for (const auto& s : sensed) {
      if (s.constraint.vacuous()) continue;
      ConstraintRow row;
      row.coeffs = Eigen::VectorXd::Zero(qp.u_hat.size());
      row.coeffs.segment<3>(static_cast<Eigen::Index>(3 * s.i)) =
          s.constraint.lg.segment<3>(0).transpose();
      row.coeffs.segment<3>(static_cast<Eigen::Index>(3 * s.j)) =
          s.constraint.lg.segment<3>(3).transpose();
      row.offset = s.constraint.offset;
      qp.rows.push_back(std::move(row));
    }
    if (!qp.rows.empty()) {
      try {
        const Eigen::VectorXd u = solve_qp(qp);
        for (std::size_t v = 0; v < count; ++v) {
          result.controls[v] = clamp_input(
              detail::to_control(u.segment<3>(static_cast<Eigen::Index>(3 * v))),
              config.limits);
        }
      } catch (const InfeasibleError& e) {
        FilterEvent ev{FilterEvent::Kind::fallback, {}, e.what()};
        for (const auto& s : sensed) {
          if (s.constraint.vacuous()) continue;
          assign_fallback(s.i, evading[0]);
          assign_fallback(s.j, evading[1]);
        }
        for (std::size_t v = 0; v < count; ++v) {
          if (fallback[v] && !forced[v]) ev.vehicles.push_back(v);
        }
        result.events.push_back(std::move(ev));
      }
    }
  } else {
    const PairControl g = stack_controls(evading[0], evading[1]);
    for (std::size_t v = 0; v < count; ++v) {
      if (forced[v]) continue;
      QPProblem qp;
      qp.u_hat = detail::to_vector(result.controls[v]);
      detail::set_box(qp, 1, config.limits);
      std::optional<ControlInput> own_evading;
      for (const auto& s : sensed) {
        if (s.constraint.vacuous() || (s.i != v && s.j != v)) continue;
        const bool first = s.i == v;
        const Eigen::Index own = first ? 0 : 3;
        const Eigen::Index other = first ? 3 : 0;
        const double own_g = s.constraint.lg.segment<3>(own).dot(g.segment<3>(own));
        const double other_g =
            s.constraint.lg.segment<3>(other).dot(g.segment<3>(other));
        ConstraintRow row;
        row.coeffs = s.constraint.lg.segment<3>(own).transpose();
        row.offset = -own_g + 0.5 * (own_g + other_g + s.constraint.offset);
        qp.rows.push_back(std::move(row));
        if (!own_evading) own_evading = first ? evading[0] : evading[1];
      }
      if (qp.rows.empty()) continue;
      try {
        result.controls[v] =
            clamp_input(detail::to_control(solve_qp(qp)), config.limits);
      } catch (const InfeasibleError& e) {
        assign_fallback(v, *own_evading);
        result.events.push_back({FilterEvent::Kind::fallback, {v}, e.what()});
      }
    }
  }

  for (std::size_t v = 0; v < count; ++v) {
    if (fallback[v]) result.controls[v] = *fallback[v];
  }
  for (const auto& s : sensed) {
    const PairControl u =
        stack_controls(result.controls[s.i], result.controls[s.j]);
    result.sensed_pairs.push_back({s.i, s.j, s.constraint.h,
                                   s.constraint.h_tilde, s.constraint.margin(u)});
  }
  return result;
}

}  // namespace fwcbf

#endif  // FWCBF_SAFETY_FILTER_HPP
