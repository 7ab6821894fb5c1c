#ifndef FWCBF_BARRIER_HPP
#define FWCBF_BARRIER_HPP

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "fwcbf/vehicle_dynamics.hpp"

namespace fwcbf {

/// Thrown when a state lies outside the domain of a safety function
/// (negative radicand in the turn safety function).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Ordered pair of vehicles. `a` plays the first-vehicle role of the
/// evading maneuver (speed sigma * v in the turn maneuver).
struct PairState {
  VehicleState a;
  VehicleState b;
};

struct TurnManeuver {
  double sigma = 1.0;
  double speed = 16.0;
  double turn_rate = 0.9 * 13.0 * std::numbers::pi / 180.0;

  double radius_a() const { return sigma * speed / turn_rate; }
  double radius_b() const { return speed / turn_rate; }

  void validate() const {
    if (!(sigma > 0.0 && sigma <= 1.0)) {
      throw std::invalid_argument("TurnManeuver: sigma must be in (0, 1]");
    }
    if (!(turn_rate > 0.0) || !(speed > 0.0)) {
      throw std::invalid_argument(
          "TurnManeuver: speed and turn rate must be positive");
    }
  }
};

struct StraightManeuver {
  double v1 = 16.0;
  double v2 = 24.0;
  double zeta1 = 0.0;
  double zeta2 = 0.0;

  void validate() const {
    if (v1 == v2) {
      throw std::invalid_argument("StraightManeuver: v1 and v2 must differ");
    }
  }
};

struct SafetyParams {
  double delta = 0.01;         // m^2
  double safe_distance = 5.0;  // D_s, m

  void validate() const {
    if (!(delta > 0.0) || !(safe_distance > 0.0)) {
      throw std::invalid_argument(
          "SafetyParams: delta and safe distance must be positive");
    }
  }
};

/// Linear extended class-K function alpha(h) = slope * h.
struct ClassKappaGain {
  double slope = 1.0;

  double operator()(double h) const { return slope * h; }
  double derivative(double /*h*/) const { return slope; }
};

struct BarrierValue {
  double value = 0.0;
  double minimizer_tau = 0.0;
};

enum class BarrierKind { turn, straight };

inline std::string to_string(BarrierKind kind) {
  return kind == BarrierKind::turn ? "turn" : "straight";
}

inline BarrierKind barrier_kind_from_string(const std::string& name) {
  if (name == "turn") return BarrierKind::turn;
  if (name == "straight") return BarrierKind::straight;
  throw std::invalid_argument("unknown barrier kind: " + name);
}

/// Evading maneuver plus safety function parameters.
struct BarrierConfig {
  BarrierKind kind = BarrierKind::turn;
  TurnManeuver turn;
  StraightManeuver straight;
  SafetyParams safety;
};

/// Gradient layout: [px_a, py_a, heading_a, pz_a, px_b, py_b, heading_b, pz_b].
using PairGradient = Eigen::Matrix<double, 8, 1>;
/// Stacked control: [v_a, omega_a, zeta_a, v_b, omega_b, zeta_b].
using PairControl = Eigen::Matrix<double, 6, 1>;
using PairControlRow = Eigen::Matrix<double, 1, 6>;

inline PairControl stack_controls(const ControlInput& a, const ControlInput& b) {
  PairControl u;
  u << a.speed, a.turn_rate, a.climb_rate, b.speed, b.turn_rate, b.climb_rate;
  return u;
}

// ---------------------------------------------------------------------------
// Safety functions

inline double squared_planar_distance(const PairState& pair) {
  const double dx = pair.a.px - pair.b.px;
  const double dy = pair.a.py - pair.b.py;
  return dx * dx + dy * dy;
}

inline double rho_straight(const PairState& pair, double safe_distance) {
  return std::sqrt(squared_planar_distance(pair)) - safe_distance;
}

inline double rho_turn_radicand(const PairState& pair,
                                const SafetyParams& params) {
  const double th = pair.a.heading;
  return squared_planar_distance(pair) - 2.0 * params.delta +
         params.delta * std::sin(th) - params.delta * std::cos(th);
}

inline double rho_turn(const PairState& pair, const SafetyParams& params) {
  const double radicand = rho_turn_radicand(pair, params);
  if (radicand < 0.0) {
    throw DomainError("rho_turn: negative radicand, state outside domain");
  }
  return std::sqrt(radicand) - params.safe_distance;
}

inline double rho(const PairState& pair, const BarrierConfig& config) {
  return config.kind == BarrierKind::turn
             ? rho_turn(pair, config.safety)
             : rho_straight(pair, config.safety.safe_distance);
}

// ---------------------------------------------------------------------------
// Evading maneuvers

inline std::array<ControlInput, 2> evading_controls(
    const BarrierConfig& config) {
  if (config.kind == BarrierKind::turn) {
    const TurnManeuver& m = config.turn;
    return {ControlInput{m.sigma * m.speed, m.turn_rate, 0.0},
            ControlInput{m.speed, m.turn_rate, 0.0}};
  }
  const StraightManeuver& m = config.straight;
  return {ControlInput{m.v1, 0.0, m.zeta1}, ControlInput{m.v2, 0.0, m.zeta2}};
}

/// Exact pair state after flying the evading maneuver for tau seconds.
inline PairState propagate_pair(const PairState& pair,
                                const BarrierConfig& config, double tau) {
  if (config.kind == BarrierKind::turn) {
    const TurnManeuver& m = config.turn;
    return {propagate_turn(pair.a, m.sigma * m.speed, m.turn_rate, tau),
            propagate_turn(pair.b, m.speed, m.turn_rate, tau)};
  }
  const StraightManeuver& m = config.straight;
  return {propagate_straight(pair.a, m.v1, m.zeta1, tau),
          propagate_straight(pair.b, m.v2, m.zeta2, tau)};
}

// ---------------------------------------------------------------------------
// Closed-form barriers

namespace detail {

inline Eigen::Vector2d relative_position(const PairState& pair) {
  return {pair.a.px - pair.b.px, pair.a.py - pair.b.py};
}

inline Eigen::Vector2d unit(double angle) {
  return {std::cos(angle), std::sin(angle)};
}

inline double cross(const Eigen::Vector2d& u, const Eigen::Vector2d& v) {
  return u.x() * v.y() - u.y() * v.x();
}

// Turn-kind radicand along the maneuver: A + P cos(w t) + Q sin(w t).
struct TurnPhasor {
  double offset = 0.0;  // A
  double cos_coeff = 0.0;  // P
  double sin_coeff = 0.0;  // Q
  double amplitude() const { return std::hypot(cos_coeff, sin_coeff); }
};

inline TurnPhasor turn_phasor(const PairState& pair, const TurnManeuver& m,
                              const SafetyParams& s) {
  const double r_a = m.radius_a();
  const double r_b = m.radius_b();
  const double th_a = pair.a.heading;
  const double th_b = pair.b.heading;
  // p_i(t) = c_i + r_i * Rot(w t) * [sin th_i, -cos th_i]
  const Eigen::Vector2d spoke_a{std::sin(th_a), -std::cos(th_a)};
  const Eigen::Vector2d spoke_b{std::sin(th_b), -std::cos(th_b)};
  const Eigen::Vector2d dc =
      relative_position(pair) - r_a * spoke_a + r_b * spoke_b;
  const Eigen::Vector2d w = r_a * spoke_a - r_b * spoke_b;
  TurnPhasor ph;
  ph.offset = dc.squaredNorm() + w.squaredNorm() - 2.0 * s.delta;
  ph.cos_coeff = 2.0 * dc.dot(w) + s.delta * (std::sin(th_a) - std::cos(th_a));
  ph.sin_coeff = 2.0 * cross(w, dc) + s.delta * (std::cos(th_a) + std::sin(th_a));
  return ph;
}

}  // namespace detail

/// Worst-case future value of the straight safety function: closest point
/// of approach of the two straight-line trajectories.
inline BarrierValue h_straight(const PairState& pair, const StraightManeuver& m,
                               double safe_distance) {
  const Eigen::Vector2d p0 = detail::relative_position(pair);
  const Eigen::Vector2d dv = m.v1 * detail::unit(pair.a.heading) -
                             m.v2 * detail::unit(pair.b.heading);
  const double dv2 = dv.squaredNorm();
  if (dv2 == 0.0) {
    throw std::invalid_argument(
        "h_straight: zero relative velocity under the straight maneuver");
  }
  const double tau = std::max(0.0, -p0.dot(dv) / dv2);
  return {(p0 + tau * dv).norm() - safe_distance, tau};
}

/// Worst-case future value of the turn safety function. Both vehicles turn
/// at the same rate, so the radicand of the safety function is a single
/// sinusoid in time and its infimum is offset minus amplitude.
inline BarrierValue h_turn(const PairState& pair, const TurnManeuver& m,
                           const SafetyParams& s) {
  const detail::TurnPhasor ph = detail::turn_phasor(pair, m, s);
  const double amp = ph.amplitude();
  const double radicand = ph.offset - amp;
  if (radicand < 0.0) {
    throw DomainError("h_turn: negative radicand, state outside domain");
  }
  double tau = 0.0;
  if (amp > 0.0) {
    double phase = std::atan2(-ph.sin_coeff, -ph.cos_coeff);
    if (phase < 0.0) phase += 2.0 * std::numbers::pi;
    if (phase >= 2.0 * std::numbers::pi) phase = 0.0;
    tau = phase / m.turn_rate;
  }
  return {std::sqrt(radicand) - s.safe_distance, tau};
}

inline BarrierValue evaluate_h(const PairState& pair,
                               const BarrierConfig& config) {
  return config.kind == BarrierKind::turn
             ? h_turn(pair, config.turn, config.safety)
             : h_straight(pair, config.straight, config.safety.safe_distance);
}

// ---------------------------------------------------------------------------
// Derivatives

struct BarrierGradient {
  PairGradient grad = PairGradient::Zero();
  BarrierValue h;
  /// Set when h is not differentiable at the pair; `grad` is then the
  /// one-sided value obtained with the reported minimizer held fixed.
  bool at_kink = false;
};

/// Gradient by the envelope theorem: differentiate the safety function at
/// the propagated state through the maneuver flow map, minimizer held fixed.
inline BarrierGradient grad_h(const PairState& pair,
                              const BarrierConfig& config) {
  BarrierGradient out;
  out.h = evaluate_h(pair, config);
  const double tau = out.h.minimizer_tau;
  const PairState ahead = propagate_pair(pair, config, tau);
  const Eigen::Vector2d rel = detail::relative_position(ahead);

  // d(propagated planar position)/d(initial heading), per vehicle
  Eigen::Vector2d dpa_dth;
  Eigen::Vector2d dpb_dth;
  double drho_dth_a = 0.0;
  Eigen::Vector2d drho_dp;

  if (config.kind == BarrierKind::turn) {
    const TurnManeuver& m = config.turn;
    const double r_a = m.radius_a();
    const double r_b = m.radius_b();
    const double th_a = pair.a.heading;
    const double th_b = pair.b.heading;
    const double phi = m.turn_rate * tau;
    dpa_dth = r_a * Eigen::Vector2d{std::cos(th_a + phi) - std::cos(th_a),
                                    std::sin(th_a + phi) - std::sin(th_a)};
    dpb_dth = r_b * Eigen::Vector2d{std::cos(th_b + phi) - std::cos(th_b),
                                    std::sin(th_b + phi) - std::sin(th_b)};
    const double root = out.h.value + config.safety.safe_distance;
    if (root == 0.0) {
      out.at_kink = true;
      return out;
    }
    drho_dp = rel / root;
    const double th_hat = ahead.a.heading;
    drho_dth_a = config.safety.delta * (std::cos(th_hat) + std::sin(th_hat)) /
                 (2.0 * root);
    const detail::TurnPhasor ph = detail::turn_phasor(pair, m, config.safety);
    // every tau is a minimizer when the radicand does not oscillate
    if (ph.amplitude() <= 1e-14 * (1.0 + std::abs(ph.offset))) {
      out.at_kink = true;
    }
  } else {
    const StraightManeuver& m = config.straight;
    dpa_dth = tau * m.v1 * Eigen::Vector2d{-std::sin(pair.a.heading),
                                           std::cos(pair.a.heading)};
    dpb_dth = tau * m.v2 * Eigen::Vector2d{-std::sin(pair.b.heading),
                                           std::cos(pair.b.heading)};
    const double dist = rel.norm();
    if (dist == 0.0) {
      out.at_kink = true;
      return out;
    }
    drho_dp = rel / dist;
    const Eigen::Vector2d p0 = detail::relative_position(pair);
    const Eigen::Vector2d dv = m.v1 * detail::unit(pair.a.heading) -
                               m.v2 * detail::unit(pair.b.heading);
    if (p0.dot(dv) == 0.0) out.at_kink = true;
  }

  out.grad(0) = drho_dp.x();
  out.grad(1) = drho_dp.y();
  out.grad(2) = drho_dp.dot(dpa_dth) + drho_dth_a;
  out.grad(3) = 0.0;
  out.grad(4) = -drho_dp.x();
  out.grad(5) = -drho_dp.y();
  out.grad(6) = -drho_dp.dot(dpb_dth);
  out.grad(7) = 0.0;
  return out;
}

/// Control matrix of the pair dynamics: x' = g(x) u with u stacked as
/// [v_a, omega_a, zeta_a, v_b, omega_b, zeta_b]; the drift term is zero.
inline Eigen::Matrix<double, 8, 6> control_matrix(const PairState& pair) {
  Eigen::Matrix<double, 8, 6> g = Eigen::Matrix<double, 8, 6>::Zero();
  g(0, 0) = std::cos(pair.a.heading);
  g(1, 0) = std::sin(pair.a.heading);
  g(2, 1) = 1.0;
  g(3, 2) = 1.0;
  g(4, 3) = std::cos(pair.b.heading);
  g(5, 3) = std::sin(pair.b.heading);
  g(6, 4) = 1.0;
  g(7, 5) = 1.0;
  return g;
}

struct LieDerivatives {
  double lf = 0.0;
  PairControlRow lg = PairControlRow::Zero();
  BarrierValue h;
  bool at_kink = false;
};

inline LieDerivatives lie_derivatives(const PairState& pair,
                                      const BarrierConfig& config) {
  const BarrierGradient g = grad_h(pair, config);
  LieDerivatives out;
  out.lf = 0.0;
  out.lg = g.grad.transpose() * control_matrix(pair);
  out.h = g.h;
  out.at_kink = g.at_kink;
  return out;
}

/// Lf h + Lg h u + alpha(h); u lies in the admissible set iff this is >= 0.
inline double constraint_margin(const PairState& pair, const PairControl& u,
                                const BarrierConfig& config,
                                const ClassKappaGain& alpha) {
  const LieDerivatives ld = lie_derivatives(pair, config);
  return ld.lf + ld.lg.dot(u) + alpha(ld.h.value);
}

}  // namespace fwcbf

#endif  // FWCBF_BARRIER_HPP
