#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "isoline/errors.hpp"

namespace isoline {

enum class DerivativeMode {
  Oracle,           // caller supplies the exact concentration rate
  DirtyDerivative,  // first-order filtered backward difference of the measurement
};

/**
 * Gains of the concentration-feedback steering law
 *
 *   omega = kp * e + ki * sigma,   sigma' = e,
 *   e     = eps' + c1 * tanh(eps / c2),   eps = s - s_d.
 *
 * The tanh keeps the error term bounded regardless of how far the vehicle
 * starts from the target level; c1 sets the approach rate on the surface
 * e = 0 and c2 the error scale at which it saturates.
 */
struct ControllerParams {
  double kp = 0;  // 1/concentration
  double ki = 0;  // 1/(concentration s)
  double c1 = 0;  // concentration/s
  double c2 = 0;  // concentration
  DerivativeMode derivative_mode = DerivativeMode::DirtyDerivative;
  double tau_f = 0;  // s, dirty-derivative filter constant
  std::optional<double> sigma_limit;  // |sigma| clamp (anti-windup), off by default
  std::optional<double> omega_limit;  // |omega| clamp, rad/s, off by default

  void validate() const {
    if (!(kp > 0.0)) throw std::invalid_argument("ControllerParams: kp must be > 0");
    if (!(ki >= 0.0)) throw std::invalid_argument("ControllerParams: ki must be >= 0");
    if (!(c1 > 0.0)) throw std::invalid_argument("ControllerParams: c1 must be > 0");
    if (!(c2 > 0.0)) throw std::invalid_argument("ControllerParams: c2 must be > 0");
    if (derivative_mode == DerivativeMode::DirtyDerivative && !(tau_f > 0.0))
      throw std::invalid_argument("ControllerParams: tau_f must be > 0 in dirty-derivative mode");
    if (sigma_limit && !(*sigma_limit > 0.0))
      throw std::invalid_argument("ControllerParams: sigma_limit must be > 0 when set");
    if (omega_limit && !(*omega_limit > 0.0))
      throw std::invalid_argument("ControllerParams: omega_limit must be > 0 when set");
  }
};

struct ControllerState {
  double sigma = 0;           // accumulated error term
  double prev_epsilon = 0;    // last measured tracking error
  double deriv_estimate = 0;  // filtered d(eps)/dt
  bool initialized = false;
};

/// Zeroed state; idempotent.
inline ControllerState reset() { return ControllerState{}; }

/// Sliding-surface error term e = eps' + c1 tanh(eps / c2).
/// Total on all inputs; |e - eps'| <= c1 always.
inline double error_term(double epsilon, double epsilon_dot, double c1, double c2) {
  return epsilon_dot + c1 * std::tanh(epsilon / c2);
}

/// First-order filtered backward difference:
///   est <- a * est_prev + (1 - a) * (eps - eps_prev) / dt,  a = tau_f / (tau_f + dt).
inline double dirty_derivative(double prev_estimate, double prev_epsilon, double epsilon,
                               double dt, double tau_f) {
  const double a = tau_f / (tau_f + dt);
  return a * prev_estimate + (1.0 - a) * (epsilon - prev_epsilon) / dt;
}

struct ControllerOutput {
  double omega = 0;        // rad/s command
  double e = 0;            // sliding-surface error term
  double epsilon = 0;      // s_meas - s_d
  double epsilon_dot = 0;  // rate estimate used for e
};

/**
 * One controller tick. Mutates `ctrl` (integrator and filter memory) and
 * returns the command. In dirty-derivative mode the first call after a
 * reset only primes the filter and uses eps' = 0.
 */
inline ControllerOutput update(ControllerState& ctrl, const ControllerParams& params,
                               double s_meas, double s_d, double dt,
                               std::optional<double> oracle_sdot = std::nullopt) {
  if (!(dt > 0.0)) throw NonpositiveStep("controller update: dt must be > 0");

  ControllerOutput out;
  out.epsilon = s_meas - s_d;

  if (params.derivative_mode == DerivativeMode::Oracle) {
    if (!oracle_sdot) throw MissingOracle("oracle derivative mode needs oracle_sdot");
    out.epsilon_dot = *oracle_sdot;
  } else {
    if (oracle_sdot)
      throw std::invalid_argument("oracle_sdot given but derivative_mode is DirtyDerivative");
    if (!ctrl.initialized) {
      out.epsilon_dot = 0.0;
      ctrl.deriv_estimate = 0.0;
      ctrl.initialized = true;
    } else {
      ctrl.deriv_estimate =
          dirty_derivative(ctrl.deriv_estimate, ctrl.prev_epsilon, out.epsilon, dt, params.tau_f);
      out.epsilon_dot = ctrl.deriv_estimate;
    }
  }
  ctrl.prev_epsilon = out.epsilon;

  out.e = error_term(out.epsilon, out.epsilon_dot, params.c1, params.c2);

  ctrl.sigma += out.e * dt;
  if (params.sigma_limit)
    ctrl.sigma = std::clamp(ctrl.sigma, -*params.sigma_limit, *params.sigma_limit);

  out.omega = params.kp * out.e + params.ki * ctrl.sigma;
  if (params.omega_limit)
    out.omega = std::clamp(out.omega, -*params.omega_limit, *params.omega_limit);
  return out;
}

}  // namespace isoline
