#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "isoline/errors.hpp"
#include "isoline/text.hpp"

namespace isoline {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

/// Closed-loop constants for level tracking in a field that is linear in
/// the source distance: slope alpha (with known lower bound alpha_lower),
/// vehicle speed v, and orbit radius r_d, plus the controller gains.
struct CircularLoopParams {
  double kp = 0;
  double ki = 0;
  double c1 = 0;
  double c2 = 0;
  double alpha = 0;        // concentration/m
  double alpha_lower = 0;  // known lower bound on alpha
  double v = 0;            // m/s
  double r_d = 0;          // m

  void validate() const {
    if (!(kp > 0.0)) throw std::invalid_argument("CircularLoopParams: kp must be > 0");
    if (!(ki >= 0.0)) throw std::invalid_argument("CircularLoopParams: ki must be >= 0");
    if (!(c1 > 0.0)) throw std::invalid_argument("CircularLoopParams: c1 must be > 0");
    if (!(c2 > 0.0)) throw std::invalid_argument("CircularLoopParams: c2 must be > 0");
    if (!(alpha_lower > 0.0) || !(alpha >= alpha_lower))
      throw std::invalid_argument("CircularLoopParams: need alpha >= alpha_lower > 0");
    if (!(v > 0.0)) throw std::invalid_argument("CircularLoopParams: v must be > 0");
    if (!(r_d > 0.0)) throw std::invalid_argument("CircularLoopParams: r_d must be > 0");
  }
};

/// Gain selection rules, evaluated at the lower slope bound:
///   kp (kp - 2) v alpha_lower > ki   and   v alpha_lower > c1 > 0.
/// With ki > 0 the first rule forces kp > 2; reported separately.
struct GainConditions {
  bool proportional_ok = false;  // kp(kp-2) v alpha_lower > ki
  bool surface_ok = false;       // v alpha_lower > c1 > 0
  bool kp_above_two = false;
  bool ki_positive = false;

  bool pass() const { return proportional_ok && surface_ok; }
};

inline GainConditions check_gain_conditions(const CircularLoopParams& p) {
  GainConditions g;
  g.proportional_ok = p.kp * (p.kp - 2.0) * p.v * p.alpha_lower > p.ki;
  g.surface_ok = p.v * p.alpha_lower > p.c1 && p.c1 > 0.0;
  g.kp_above_two = p.kp > 2.0;
  g.ki_positive = p.ki > 0.0;
  return g;
}

/// Linearization of the closed loop around the orbit state
/// [r_d, -pi/2, -v/(ki r_d)] in (distance, crossing angle, integrator).
inline Mat3 closed_loop_jacobian(const CircularLoopParams& p) {
  Mat3 a;
  a << 0.0, p.v, 0.0,                                                          //
      -p.kp * p.c1 * p.alpha / p.c2 - p.v / (p.r_d * p.r_d), -p.kp * p.v * p.alpha, p.ki,  //
      -p.c1 * p.alpha / p.c2, -p.v * p.alpha, 0.0;
  return a;
}

/**
 * Quadratic stability certificate for the circular-orbit loop: the
 * Lyapunov weight matrix P, the decay matrix Q with A'P + PA = -Q, their
 * eigenvalues, and the guaranteed decay rate min eig(Q) / max eig(P).
 *
 * `positive_definite` is a verdict flag, not an exception: parameter sets
 * that satisfy the gain rules can still produce an indefinite Q when c1
 * is small relative to c2 v / (kp alpha r_d^2); callers inspect the flag.
 * Verdicts within `kEigTolerance` of zero are reported as marginal.
 */
struct LyapunovCertificate {
  double mu1 = 0, mu2 = 0, mu3 = 0, mu4 = 0;
  Mat3 a = Mat3::Zero();
  Mat3 p = Mat3::Zero();
  Mat3 q = Mat3::Zero();
  Eigen::Vector3cd eig_a;
  Vec3 eig_p = Vec3::Zero();  // ascending
  Vec3 eig_q = Vec3::Zero();  // ascending
  double decay_rate = 0;      // min eig(Q) / max eig(P)
  double identity_residual = 0;  // ||A'P + PA + Q|| / ||Q||, Frobenius
  bool positive_definite = false;
  bool marginal = false;
};

inline constexpr double kEigTolerance = 1e-10;

inline LyapunovCertificate lyapunov_certificate(const CircularLoopParams& p) {
  p.validate();
  if (!(p.ki > 0.0))
    throw PreconditionViolated("lyapunov_certificate: ki must be > 0 (mu4 vanishes otherwise)");

  const double kp = p.kp, ki = p.ki, c1 = p.c1, c2 = p.c2;
  const double al = p.alpha, v = p.v, rd = p.r_d;

  LyapunovCertificate cert;
  cert.mu1 = kp * c1 * al / c2 + v / (rd * rd);
  cert.mu2 = kp * al * (kp * al * v * cert.mu1 - ki * c1 * al / (2.0 * c2));
  cert.mu3 = cert.mu1 * v / 2.0 + ki * al * v / 2.0;
  cert.mu4 = kp * ki * c2 * v * cert.mu1 / c1 - ki * ki / 2.0;

  cert.a = closed_loop_jacobian(p);

  const double kav = kp * al * v;
  cert.p << 2.0 * cert.mu2 + cert.mu1 * cert.mu1, kav * cert.mu1, -ki * cert.mu1,  //
      kav * cert.mu1, 2.0 * cert.mu3 + kav * kav, -ki * kav,                       //
      -ki * cert.mu1, -ki * kav, 2.0 * cert.mu4 + ki * ki;
  cert.p *= 0.5;

  // Off-diagonal decay entry; equals ki alpha v (kp c2 v / (c1 rd^2) - ki / 2).
  const double q23 =
      -ki * kav * kav - ki * ki * al * v / 2.0 + kp * ki * c2 * al * v * v * cert.mu1 / c1;
  cert.q << kav * cert.mu1 * cert.mu1 - ki * c1 * al * cert.mu1 / c2, 0.0, 0.0,  //
      0.0, kav * kav * kav, q23,                                                 //
      0.0, q23, kp * ki * ki * al * v;

  Eigen::SelfAdjointEigenSolver<Mat3> ep(cert.p), eq(cert.q);
  cert.eig_p = ep.eigenvalues();
  cert.eig_q = eq.eigenvalues();
  cert.eig_a = Eigen::EigenSolver<Mat3>(cert.a).eigenvalues();
  cert.decay_rate = cert.eig_q(0) / cert.eig_p(2);
  cert.identity_residual =
      (cert.a.transpose() * cert.p + cert.p * cert.a + cert.q).norm() / cert.q.norm();

  const double worst = std::min(cert.eig_p(0), cert.eig_q(0));
  cert.positive_definite = worst > kEigTolerance;
  cert.marginal = std::abs(worst) <= kEigTolerance;
  return cert;
}

// ---- generic matrix checks ---------------------------------------------

inline bool is_positive_definite(const Eigen::MatrixXd& m, double tol = kEigTolerance) {
  if (m.rows() != m.cols()) throw NotSymmetric("matrix is not square");
  const double scale = std::max(1.0, m.norm());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw NotSymmetric("matrix is not symmetric within 1e-9");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  return es.eigenvalues().minCoeff() > tol;
}

inline bool is_hurwitz(const Eigen::MatrixXd& a, double tol = kEigTolerance) {
  if (a.rows() != a.cols()) throw NotSymmetric("matrix is not square");
  Eigen::EigenSolver<Eigen::MatrixXd> es(a);
  return es.eigenvalues().real().maxCoeff() < -tol;
}

// ---- bounds for general smooth fields ------------------------------------

/**
 * Minimum proportional gain keeping the crossing angle trapped in the cone
 * [-pi + eps, -eps] and the error term ultimately bounded, for a field with
 * gradient-norm bounds [gamma1, gamma2] and Hessian bound gamma3:
 *
 *   kp > max( gamma3 v / (gamma1 sin(eps) (v gamma1 cos(eps) - c1)),
 *             (c2 gamma3 v + c1 gamma2) / (c1 gamma1 sin(eps)) ).
 */
inline double prop2_threshold(double gamma1, double gamma2, double gamma3, double c1, double c2,
                              double v, double epsilon_angle) {
  if (!(gamma1 > 0.0) || !(gamma2 >= gamma1) || !(gamma3 >= 0.0))
    throw std::invalid_argument("prop2_threshold: need 0 < gamma1 <= gamma2, gamma3 >= 0");
  if (!(c1 > 0.0) || !(c2 > 0.0) || !(v > 0.0))
    throw std::invalid_argument("prop2_threshold: c1, c2, v must be > 0");
  if (!(epsilon_angle > 0.0) || !(epsilon_angle < M_PI / 2.0))
    throw std::invalid_argument("prop2_threshold: epsilon_angle must be in (0, pi/2)");
  const double se = std::sin(epsilon_angle), ce = std::cos(epsilon_angle);
  const double margin = v * gamma1 * ce - c1;
  if (!(margin > 0.0))
    throw InfeasibleMargin("need v gamma1 cos(eps) > c1 (got margin " + format_g9(margin) + ")");
  const double first = gamma3 * v / (gamma1 * se * margin);
  const double second = (c2 * gamma3 * v + c1 * gamma2) / (c1 * gamma1 * se);
  return std::max(first, second);
}

/// Steady-state tracking error bound
///   c2 * atanh((c2 gamma3 v + c1 gamma2) / (kp c1 gamma1 sin(eps))),
/// defined when the argument is below 1 (kp above the threshold).
inline double prop2_error_bound(double kp, double c1, double c2, double gamma1, double gamma2,
                                double gamma3, double v, double epsilon_angle) {
  if (!(kp > 0.0)) throw std::invalid_argument("prop2_error_bound: kp must be > 0");
  if (!(epsilon_angle > 0.0) || !(epsilon_angle < M_PI / 2.0))
    throw std::invalid_argument("prop2_error_bound: epsilon_angle must be in (0, pi/2)");
  const double arg =
      (c2 * gamma3 * v + c1 * gamma2) / (kp * c1 * gamma1 * std::sin(epsilon_angle));
  if (!(arg < 1.0))
    throw BoundUndefined("atanh argument " + format_g9(arg) + " >= 1; raise kp");
  return c2 * std::atanh(arg);
}

// ---- bounded scalar system z' = -k tanh(z) + b ---------------------------

/// Asymptotic bound atanh(b/k) for z' = -k tanh(z) + b with k > b >= 0.
inline double lemma1_bound(double k, double b) {
  if (!(k > 0.0) || b < 0.0 || k < b)
    throw PreconditionViolated("lemma1_bound: need k > b >= 0");
  if (k == b) throw BoundUndefined("lemma1_bound: bound diverges at b = k");
  return std::atanh(b / k);
}

/// RK4 trajectory of z' = -k tanh(z) + b sampled every dt (z0 first).
inline std::vector<double> simulate_lemma1(double k, double b, double z0, double t_final,
                                           double dt) {
  if (!(k > b) || !(b > 0.0)) throw PreconditionViolated("simulate_lemma1: need k > b > 0");
  if (!(dt > 0.0)) throw NonpositiveStep("simulate_lemma1: dt must be > 0");
  if (dt > 0.01 / k)
    throw PreconditionViolated("simulate_lemma1: dt must be <= 0.01/k for accuracy");
  auto f = [&](double z) { return -k * std::tanh(z) + b; };
  const int n = static_cast<int>(std::llround(t_final / dt));
  std::vector<double> out;
  out.reserve(n + 1);
  double z = z0;
  out.push_back(z);
  for (int i = 0; i < n; ++i) {
    const double k1 = f(z);
    const double k2 = f(z + 0.5 * dt * k1);
    const double k3 = f(z + 0.5 * dt * k2);
    const double k4 = f(z + dt * k3);
    z += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    out.push_back(z);
  }
  return out;
}

// ---- report serialization --------------------------------------------------

namespace detail {

inline void write_matrix_kv(std::ostream& out, const char* key, const Mat3& m) {
  out << key << " =";
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out << ' ' << format_g9(m(r, c));
  out << '\n';
}

}  // namespace detail

/// Flat key-value dump of a certificate (matrices row-major, 9 significant
/// digits), the wire format of the CLI `stability` subcommand.
inline void write_certificate(std::ostream& out, const LyapunovCertificate& cert) {
  out << "mu1 = " << format_g9(cert.mu1) << '\n';
  out << "mu2 = " << format_g9(cert.mu2) << '\n';
  out << "mu3 = " << format_g9(cert.mu3) << '\n';
  out << "mu4 = " << format_g9(cert.mu4) << '\n';
  detail::write_matrix_kv(out, "A", cert.a);
  detail::write_matrix_kv(out, "P", cert.p);
  detail::write_matrix_kv(out, "Q", cert.q);
  out << "eig_A_real =";
  for (int i = 0; i < 3; ++i) out << ' ' << format_g9(cert.eig_a(i).real());
  out << '\n';
  out << "eig_A_imag =";
  for (int i = 0; i < 3; ++i) out << ' ' << format_g9(cert.eig_a(i).imag());
  out << '\n';
  out << "eig_P_min = " << format_g9(cert.eig_p(0)) << '\n';
  out << "eig_Q_min = " << format_g9(cert.eig_q(0)) << '\n';
  out << "decay_rate = " << format_g9(cert.decay_rate) << '\n';
  out << "lyapunov_identity_residual = " << format_g9(cert.identity_residual) << '\n';
  out << "positive_definite = " << (cert.positive_definite ? 1 : 0) << '\n';
  out << "marginal = " << (cert.marginal ? 1 : 0) << '\n';
}

}  // namespace isoline
