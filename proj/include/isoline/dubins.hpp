#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "isoline/errors.hpp"
#include "isoline/field.hpp"

namespace isoline {

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2 * M_PI);
  if (a <= -M_PI) a += 2 * M_PI;
  return a;
}

/// Planar unicycle pose. Heading is kept in (-pi, pi] after every step.
struct RobotState {
  double x = 0;        // m
  double y = 0;        // m
  double heading = 0;  // rad
};

inline Vec2 position(const RobotState& s) { return {s.x, s.y}; }
inline Vec2 heading_vector(const RobotState& s) {
  return {std::cos(s.heading), std::sin(s.heading)};
}

namespace detail {

// One classical RK4 step of x' = v cos(th), y' = v sin(th), th' = omega.
inline RobotState rk4_step(const RobotState& s, double omega, double v, double dt) {
  auto deriv = [&](double th) { return Vec2(v * std::cos(th), v * std::sin(th)); };
  const Vec2 k1 = deriv(s.heading);
  const Vec2 k2 = deriv(s.heading + 0.5 * dt * omega);
  const Vec2 k3 = k2;  // theta at the third stage equals the second
  const Vec2 k4 = deriv(s.heading + dt * omega);
  RobotState out = s;
  out.x += dt / 6.0 * (k1.x() + 2 * k2.x() + 2 * k3.x() + k4.x());
  out.y += dt / 6.0 * (k1.y() + 2 * k2.y() + 2 * k3.y() + k4.y());
  out.heading += dt * omega;
  return out;
}

}  // namespace detail

/**
 * Advances the vehicle by `dt` with the angular rate held constant
 * (zero-order hold). Integration is classical RK4; steps sweeping more
 * than 0.1 rad of heading are subdivided so coarse calls stay accurate.
 */
inline RobotState step(const RobotState& s, double omega, double v, double dt) {
  if (!(dt > 0.0)) throw NonpositiveStep("step: dt must be > 0");
  if (!(v > 0.0)) throw NonpositiveStep("step: v must be > 0");
  const int n = std::max(1, static_cast<int>(std::ceil(std::abs(omega) * dt / 0.1)));
  const double h = dt / n;
  RobotState out = s;
  for (int i = 0; i < n; ++i) out = detail::rk4_step(out, omega, v, h);
  out.heading = wrap_angle(out.heading);
  return out;
}

/// Exact constant-rate solution: a line for omega = 0, otherwise a circle
/// of radius v/|omega|. Serves as the integrator's test oracle.
inline RobotState arc_oracle(const RobotState& s, double omega, double v, double t) {
  RobotState out = s;
  if (omega == 0.0) {
    out.x += v * t * std::cos(s.heading);
    out.y += v * t * std::sin(s.heading);
    return out;
  }
  const double r = v / omega;
  out.x += r * (std::sin(s.heading + omega * t) - std::sin(s.heading));
  out.y += -r * (std::cos(s.heading + omega * t) - std::cos(s.heading));
  out.heading = wrap_angle(s.heading + omega * t);
  return out;
}

/**
 * Field-frame observables at a pose. `phi` is the signed angle from the
 * negative field gradient to the heading vector, counter-clockwise
 * positive, so that s' = v n.h = -v ||n|| cos(phi). Travelling along an
 * isoline clockwise around a peak corresponds to phi = -pi/2.
 */
struct Observables {
  double s = 0;                            // concentration
  double phi = 0;                          // rad, in (-pi, pi]
  std::optional<double> source_distance;   // m, radial fields only
  Vec2 gradient_vec = Vec2::Zero();        // concentration/m
};

inline Observables observe(const ScalarField& f, const RobotState& state) {
  Observables obs;
  const Vec2 p = position(state);
  obs.s = value(f, p);
  obs.gradient_vec = gradient(f, p);
  if (obs.gradient_vec.norm() == 0.0)
    throw SingularPoint("crossing angle undefined where the gradient vanishes");
  obs.source_distance = source_distance(f, p);
  const Vec2 u = -obs.gradient_vec;
  const Vec2 h = heading_vector(state);
  obs.phi = std::atan2(u.x() * h.y() - u.y() * h.x(), u.dot(h));
  return obs;
}

/// Exact concentration rate v n.h seen by a vehicle moving at speed v.
/// The controller's oracle derivative mode feeds on this.
inline double analytic_sdot(const ScalarField& f, const RobotState& state, double v) {
  const Vec2 n = gradient(f, position(state));
  return v * n.dot(heading_vector(state));
}

}  // namespace isoline
