#ifndef FWCBF_ORACLE_HPP
#define FWCBF_ORACLE_HPP

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>

#include "fwcbf/barrier.hpp"

namespace fwcbf {

/// Default search horizon for the brute-force barrier: one period of the
/// turn maneuver, or twice a bound on the closest-approach time.
inline double default_oracle_horizon(const PairState& pair,
                                     const BarrierConfig& config) {
  if (config.kind == BarrierKind::turn) {
    return 2.0 * std::numbers::pi / config.turn.turn_rate;
  }
  const StraightManeuver& m = config.straight;
  const double dvx = m.v1 * std::cos(pair.a.heading) -
                     m.v2 * std::cos(pair.b.heading);
  const double dvy = m.v1 * std::sin(pair.a.heading) -
                     m.v2 * std::sin(pair.b.heading);
  const double speed = std::hypot(dvx, dvy);
  if (speed == 0.0) {
    throw std::invalid_argument("h_oracle: zero relative velocity");
  }
  return 2.0 * (std::sqrt(squared_planar_distance(pair)) / speed + 1.0);
}

/// Brute-force barrier: minimum of the safety function over an n-point
/// grid of the propagated evading trajectory, refined by golden-section
/// search around the best grid cell. Independent of the closed forms.
inline double h_oracle(const PairState& pair, const BarrierConfig& config,
                       double horizon, std::size_t n = 4096,
                       double tolerance = 1e-10) {
  if (n < 2) throw std::invalid_argument("h_oracle: need at least 2 points");
  if (!(horizon > 0.0)) {
    throw std::invalid_argument("h_oracle: horizon must be positive");
  }
  auto value_at = [&](double tau) {
    return rho(propagate_pair(pair, config, tau), config);
  };

  const double step = horizon / static_cast<double>(n - 1);
  std::size_t best = 0;
  double best_value = value_at(0.0);
  for (std::size_t k = 1; k < n; ++k) {
    const double v = value_at(step * static_cast<double>(k));
    if (v < best_value) {
      best_value = v;
      best = k;
    }
  }

  double lo = best == 0 ? 0.0 : step * static_cast<double>(best - 1);
  double hi = step * static_cast<double>(best + 1);
  if (config.kind == BarrierKind::straight) hi = std::min(hi, horizon);
  constexpr double inv_phi = 0.6180339887498949;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = value_at(x1);
  double f2 = value_at(x2);
  while (hi - lo > tolerance) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = value_at(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = value_at(x2);
    }
  }
  return std::min({best_value, f1, f2, value_at(0.5 * (lo + hi))});
}

inline double h_oracle(const PairState& pair, const BarrierConfig& config) {
  return h_oracle(pair, config, default_oracle_horizon(pair, config));
}

}  // namespace fwcbf

#endif  // FWCBF_ORACLE_HPP
