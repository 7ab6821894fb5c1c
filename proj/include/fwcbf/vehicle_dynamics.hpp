#ifndef FWCBF_VEHICLE_DYNAMICS_HPP
#define FWCBF_VEHICLE_DYNAMICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fwcbf {

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double angle) {
  constexpr double pi = std::numbers::pi;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double wrapped = std::remainder(angle, two_pi);  // [-pi, pi]
  if (wrapped <= -pi) wrapped += two_pi;
  return wrapped;
}

/// Planar position, heading and altitude of one fixed-wing vehicle.
struct VehicleState {
  double px = 0.0;
  double py = 0.0;
  double heading = 0.0;
  double pz = 0.0;

  bool finite() const {
    return std::isfinite(px) && std::isfinite(py) && std::isfinite(heading) &&
           std::isfinite(pz);
  }
  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

/// Forward speed, turn rate and climb rate.
struct ControlInput {
  double speed = 0.0;
  double turn_rate = 0.0;
  double climb_rate = 0.0;

  bool finite() const {
    return std::isfinite(speed) && std::isfinite(turn_rate) &&
           std::isfinite(climb_rate);
  }
  friend bool operator==(const ControlInput&, const ControlInput&) = default;
};

struct ActuatorLimits {
  double v_min = 15.0;
  double v_max = 25.0;
  double omega_max = 13.0 * std::numbers::pi / 180.0;
  double zeta_max = 5.0;

  bool valid() const {
    return v_min > 0.0 && v_min <= v_max && omega_max > 0.0 && zeta_max >= 0.0;
  }
  bool contains(const ControlInput& u) const {
    return u.speed >= v_min && u.speed <= v_max &&
           std::abs(u.turn_rate) <= omega_max &&
           std::abs(u.climb_rate) <= zeta_max;
  }
};

/// Time derivative [px', py', heading', pz'].
using StateDerivative = std::array<double, 4>;

inline StateDerivative derivative(const VehicleState& state,
                                  const ControlInput& input) {
  if (!input.finite()) {
    throw std::invalid_argument("derivative: non-finite control input");
  }
  return {input.speed * std::cos(state.heading),
          input.speed * std::sin(state.heading), input.turn_rate,
          input.climb_rate};
}

namespace detail {
inline VehicleState advance(const VehicleState& s, const StateDerivative& d,
                            double h) {
  // heading left unwrapped inside a step; only the final state is wrapped
  return {s.px + h * d[0], s.py + h * d[1], s.heading + h * d[2],
          s.pz + h * d[3]};
}
}  // namespace detail

/// Classical RK4 step with the input held constant over dt.
inline VehicleState step_rk4(const VehicleState& state,
                             const ControlInput& input, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("step_rk4: dt must be positive");
  }
  const StateDerivative k1 = derivative(state, input);
  const StateDerivative k2 =
      derivative(detail::advance(state, k1, 0.5 * dt), input);
  const StateDerivative k3 =
      derivative(detail::advance(state, k2, 0.5 * dt), input);
  const StateDerivative k4 = derivative(detail::advance(state, k3, dt), input);
  VehicleState next;
  next.px = state.px + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
  next.py = state.py + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
  next.heading = wrap_angle(state.heading + dt * input.turn_rate);
  next.pz = state.pz + dt * input.climb_rate;
  return next;
}

/// Exact constant-rate arc. turn_rate must be non-zero.
inline VehicleState propagate_turn(const VehicleState& state, double speed,
                                   double turn_rate, double tau) {
  if (turn_rate == 0.0) {
    throw std::invalid_argument(
        "propagate_turn: zero turn rate, use propagate_straight");
  }
  if (!(tau >= 0.0)) {
    throw std::invalid_argument("propagate_turn: tau must be non-negative");
  }
  const double radius = speed / turn_rate;
  const double theta_end = state.heading + turn_rate * tau;
  return {state.px + radius * (std::sin(theta_end) - std::sin(state.heading)),
          state.py + radius * (std::cos(state.heading) - std::cos(theta_end)),
          wrap_angle(theta_end), state.pz};
}

inline VehicleState propagate_straight(const VehicleState& state, double speed,
                                       double climb_rate, double tau) {
  if (!(tau >= 0.0)) {
    throw std::invalid_argument("propagate_straight: tau must be non-negative");
  }
  return {state.px + tau * speed * std::cos(state.heading),
          state.py + tau * speed * std::sin(state.heading), state.heading,
          state.pz + tau * climb_rate};
}

inline ControlInput clamp_input(const ControlInput& input,
                                const ActuatorLimits& limits) {
  return {std::clamp(input.speed, limits.v_min, limits.v_max),
          std::clamp(input.turn_rate, -limits.omega_max, limits.omega_max),
          std::clamp(input.climb_rate, -limits.zeta_max, limits.zeta_max)};
}

}  // namespace fwcbf

#endif  // FWCBF_VEHICLE_DYNAMICS_HPP
