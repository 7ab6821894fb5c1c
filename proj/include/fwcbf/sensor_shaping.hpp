#ifndef FWCBF_SENSOR_SHAPING_HPP
#define FWCBF_SENSOR_SHAPING_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>

#include "fwcbf/barrier.hpp"

namespace fwcbf {

/// Omnidirectional range sensor; the sensed set is {d <= R^2}.
struct SensorModel {
  double range = 350.0;
};

inline bool in_sensor_set(const PairState& pair, const SensorModel& sensor) {
  return squared_planar_distance(pair) <= sensor.range * sensor.range;
}

/// Quadratic interpolant psi(eta) = c1 eta^2 + c2 eta + c3 blending the raw
/// barrier into the plateau psi(xi) over (beta xi, xi).
struct ShapingParams {
  double xi = 1.0;
  double beta = 0.9;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;

  double knee() const { return beta * xi; }
  double plateau() const { return c1 * xi * xi + c2 * xi + c3; }
};

inline ShapingParams make_quadratic_psi(double xi, double beta) {
  if (!(xi > 0.0) || !std::isfinite(xi)) {
    throw std::invalid_argument("make_quadratic_psi: xi must be positive");
  }
  if (!(beta > 0.0 && beta < 1.0)) {
    throw std::invalid_argument("make_quadratic_psi: beta must be in (0, 1)");
  }
  ShapingParams p;
  p.xi = xi;
  p.beta = beta;
  p.c1 = -1.0 / (2.0 * xi * (1.0 - beta));
  p.c2 = -2.0 * xi * p.c1;
  const double knee = beta * xi;
  p.c3 = knee - p.c1 * knee * knee - p.c2 * knee;
  return p;
}

/// Identity below the knee, quadratic up to xi, plateau beyond.
inline double psi_eval(double eta, const ShapingParams& p) {
  if (eta <= p.knee()) return eta;
  if (eta >= p.xi) return p.plateau();
  return p.c1 * eta * eta + p.c2 * eta + p.c3;
}

inline double psi_deriv(double eta, const ShapingParams& p) {
  if (eta <= p.knee()) return 1.0;
  if (eta >= p.xi) return 0.0;
  return 2.0 * p.c1 * eta + p.c2;
}

inline double psi_second_deriv(double eta, const ShapingParams& p) {
  if (eta <= p.knee() || eta >= p.xi) return 0.0;
  return 2.0 * p.c1;
}

/// Sensor-compatible barrier value from the raw barrier value.
inline double shape_h(double h, const ShapingParams& p) {
  if (h <= p.knee()) return h;
  if (h < p.xi) return p.c1 * h * h + p.c2 * h + p.c3;
  return p.plateau();
}

template <typename Vector>
Vector shape_grad(double h, const Vector& grad, const ShapingParams& p) {
  if (h >= p.xi) return Vector::Zero(grad.size());
  return psi_deriv(h, p) * grad;
}

/// Smallest sensing range for which a positive xi exists with the turn
/// maneuver: 2 r_a + 2 r_b + sqrt(D_s^2 + 4 delta).
inline double min_sensing_range(const TurnManeuver& m, const SafetyParams& s) {
  return 2.0 * m.radius_a() + 2.0 * m.radius_b() +
         std::sqrt(s.safe_distance * s.safe_distance + 4.0 * s.delta);
}

/// Largest xi whose sublevel set of the turn barrier fits inside the
/// sensed set of range R.
inline double xi_from_range(double range, const TurnManeuver& m,
                            const SafetyParams& s) {
  const double reach = range - 2.0 * m.radius_a() - 2.0 * m.radius_b();
  const double radicand = reach * reach - 4.0 * s.delta;
  if (!(range > min_sensing_range(m, s)) || reach <= 0.0 || radicand <= 0.0) {
    throw std::invalid_argument(
        "xi_from_range: range does not exceed the minimum sensing range, "
        "no positive xi exists");
  }
  const double xi = std::sqrt(radicand) - s.safe_distance;
  if (!(xi > 0.0)) {
    throw std::invalid_argument("xi_from_range: no positive xi exists");
  }
  return xi;
}

/// Effective class-K gain under which the raw barrier reproduces the sign of
/// the shaped barrier constraint. Defined for h < xi.
inline double alpha2(double h, const ClassKappaGain& alpha,
                     const ShapingParams& p) {
  if (!(h < p.xi)) {
    throw std::invalid_argument("alpha2: requires h < xi");
  }
  return alpha(psi_eval(h, p)) / psi_deriv(h, p);
}

// ---------------------------------------------------------------------------
// Sensor compatibility

struct CompatibilityWitness {
  PairState pair;
  /// Raw barrier value, NaN when the state is outside the barrier domain.
  double h = std::numeric_limits<double>::quiet_NaN();
};

struct CompatibilityReport {
  bool ok = true;
  std::size_t samples_checked = 0;
  std::optional<CompatibilityWitness> witness;
};

namespace detail {

// Places b at a random point and a at `distance` along `direction`.
inline PairState place_pair(std::mt19937_64& rng, double distance,
                            double direction, double heading_a,
                            double heading_b) {
  std::uniform_real_distribution<double> offset(-1000.0, 1000.0);
  PairState pair;
  pair.b = {offset(rng), offset(rng), wrap_angle(heading_b), 0.0};
  pair.a = {pair.b.px + distance * std::cos(direction),
            pair.b.py + distance * std::sin(direction), wrap_angle(heading_a),
            0.0};
  return pair;
}

}  // namespace detail

/// Samples pair states just outside the sensed set and checks that each has
/// a raw barrier value above xi, so the shaped barrier is the constant
/// plateau there. Three sample families are cycled: uniform headings, the
/// worst case of the turn maneuver (opposite headings, relative position
/// along the turning spoke), and head-on collision courses.
inline CompatibilityReport check_sensor_compatible(
    const BarrierConfig& config, const ShapingParams& shaping,
    const SensorModel& sensor, std::size_t sample_count,
    std::uint64_t seed = 42) {
  if (sample_count < 1) {
    throw std::invalid_argument("check_sensor_compatible: need samples");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-std::numbers::pi,
                                               std::numbers::pi);
  std::uniform_real_distribution<double> excess(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;

  CompatibilityReport report;
  for (std::size_t k = 0; k < sample_count; ++k) {
    // distance in (R, 1.5 R], biased toward the boundary
    const double u = excess(rng);
    double distance = sensor.range * (1.0 + 0.5 * u * u * u);
    if (distance <= sensor.range) distance = std::nextafter(sensor.range, 2.0 * sensor.range);

    PairState pair;
    switch (k % 3) {
      case 0:
        pair = detail::place_pair(rng, distance, angle(rng), angle(rng),
                                  angle(rng));
        break;
      case 1: {
        // p_a - p_b along [sin th_a, -cos th_a], th_b = th_a + pi
        const double th = angle(rng);
        pair = detail::place_pair(rng, distance, th - 0.5 * std::numbers::pi,
                                  th, th + std::numbers::pi);
        break;
      }
      default: {
        // a flies toward b, b flies toward a
        const double dir = angle(rng);
        pair = detail::place_pair(rng, distance, dir, dir + std::numbers::pi,
                                  dir + two_pi);
        break;
      }
    }
    if (in_sensor_set(pair, sensor)) continue;
    ++report.samples_checked;

    double h = std::numeric_limits<double>::quiet_NaN();
    try {
      h = evaluate_h(pair, config).value;
    } catch (const DomainError&) {
    } catch (const std::invalid_argument&) {
      continue;  // maneuver undefined for this geometry
    }
    if (!(h > shaping.xi)) {
      report.ok = false;
      report.witness = CompatibilityWitness{pair, h};
      return report;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Shaped barrier derivatives

struct ShapedLieDerivatives {
  double h = 0.0;        // raw barrier
  double h_tilde = 0.0;  // shaped barrier
  double lf = 0.0;
  PairControlRow lg = PairControlRow::Zero();
  bool at_kink = false;
};

inline ShapedLieDerivatives shaped_lie_derivatives(const PairState& pair,
                                                   const BarrierConfig& config,
                                                   const ShapingParams& p) {
  ShapedLieDerivatives out;
  const double h = evaluate_h(pair, config).value;
  if (h >= p.xi) {
    out.h = h;
    out.h_tilde = p.plateau();
    return out;
  }
  const LieDerivatives raw = lie_derivatives(pair, config);
  out.h = raw.h.value;
  out.h_tilde = shape_h(out.h, p);
  out.lf = psi_deriv(out.h, p) * raw.lf;
  out.lg = shape_grad(out.h, raw.lg, p);
  out.at_kink = raw.at_kink && out.h < p.xi;
  return out;
}

}  // namespace fwcbf

#endif  // FWCBF_SENSOR_SHAPING_HPP
