#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "isoline/stability.hpp"
#include "scenarios.hpp"

using namespace isoline;
using Catch::Approx;

namespace {

CircularLoopParams benchmark_loop() {
  CircularLoopParams p;
  p.kp = 10;
  p.ki = 1;
  p.c1 = 0.2;
  p.c2 = 1;
  p.alpha = p.alpha_lower = 0.5;
  p.v = 0.5;
  p.r_d = 10.0 * std::log(2.0);
  return p;
}

}  // namespace

TEST_CASE("gain conditions") {
  CircularLoopParams p = benchmark_loop();
  SECTION("benchmark gains pass both rules") {
    const auto g = check_gain_conditions(p);
    CHECK(g.proportional_ok);  // 10*8*0.25 = 20 > 1
    CHECK(g.surface_ok);       // 0.25 > 0.2
    CHECK(g.kp_above_two);
    CHECK(g.pass());
  }
  SECTION("c1 above v alpha_lower fails the surface rule") {
    p.c1 = 0.3;
    const auto g = check_gain_conditions(p);
    CHECK(g.proportional_ok);
    CHECK_FALSE(g.surface_ok);
    CHECK_FALSE(g.pass());
  }
  SECTION("kp at 1 with ki = 0 fails the proportional rule") {
    p.kp = 1.0;
    p.ki = 0.0;
    const auto g = check_gain_conditions(p);
    CHECK_FALSE(g.proportional_ok);  // kp(kp-2) v alpha < 0
    CHECK_FALSE(g.kp_above_two);
  }
}

TEST_CASE("closed-loop jacobian") {
  SECTION("first row is [0, v, 0]") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 20; ++i) {
      const auto p = isoline::testing::random_admissible_params(rng);
      const Mat3 a = closed_loop_jacobian(p);
      CHECK(a(0, 0) == 0.0);
      CHECK(a(0, 1) == p.v);
      CHECK(a(0, 2) == 0.0);
    }
  }

  SECTION("ki = 0 leaves the integrator direction unobservable") {
    CircularLoopParams p = benchmark_loop();
    p.ki = 0.0;
    const Mat3 a = closed_loop_jacobian(p);
    CHECK(a.col(2).norm() == 0.0);
    CHECK(a.determinant() == 0.0);
  }

  SECTION("benchmark loop is Hurwitz") {
    const Mat3 a = closed_loop_jacobian(benchmark_loop());
    const auto eig = Eigen::EigenSolver<Mat3>(a).eigenvalues();
    for (int i = 0; i < 3; ++i) CHECK(eig(i).real() < 0.0);
    CHECK(is_hurwitz(a));
  }
}

TEST_CASE("lyapunov certificate") {
  SECTION("benchmark loop: P and Q positive definite, identity tight") {
    const auto cert = lyapunov_certificate(benchmark_loop());
    CHECK(cert.positive_definite);
    CHECK_FALSE(cert.marginal);
    CHECK(cert.eig_p(0) > 0.0);
    CHECK(cert.eig_q(0) > 0.0);
    CHECK(cert.decay_rate > 0.0);
    CHECK(cert.identity_residual < 1e-12);
  }

  SECTION("P and Q are symmetric by construction") {
    const auto cert = lyapunov_certificate(benchmark_loop());
    CHECK(cert.p == cert.p.transpose());
    CHECK(cert.q == cert.q.transpose());
  }

  SECTION("A'P + PA = -Q across random admissible parameters") {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 100; ++i) {
      const auto cert = lyapunov_certificate(isoline::testing::random_admissible_params(rng));
      CHECK(cert.identity_residual <= 1e-8);
    }
  }

  SECTION("gain rules imply PD certificates and a Hurwitz loop") {
    std::mt19937_64 rng(29);
    for (int i = 0; i < 100; ++i) {
      const auto p = isoline::testing::random_admissible_params(rng);
      REQUIRE(check_gain_conditions(p).pass());
      const auto cert = lyapunov_certificate(p);
      CHECK(cert.eig_p(0) > 0.0);
      CHECK(cert.eig_q(0) > 0.0);
      CHECK(is_hurwitz(cert.a));
    }
  }

  SECTION("tiny c1 can defeat Q while the gain rules still hold") {
    // The gain rules alone do not keep the decay matrix definite: the
    // off-diagonal entry grows like c2 v^2 kp ki / (c1 r_d^2). The
    // certificate reports this through its flag instead of throwing.
    CircularLoopParams p;
    p.kp = 5.854806598931657;
    p.ki = 3.0606766018290457;
    p.c1 = 0.0023626078371916047;
    p.c2 = 1.1340173067235753;
    p.alpha = p.alpha_lower = 0.4651705754134492;
    p.v = 0.5647096379310618;
    p.r_d = 7.1621874920902915;
    REQUIRE(check_gain_conditions(p).pass());
    const auto cert = lyapunov_certificate(p);
    CHECK_FALSE(cert.positive_definite);
    CHECK(cert.eig_q(0) < 0.0);
    CHECK(cert.eig_p(0) > 0.0);      // P never degrades under the rules
    CHECK(is_hurwitz(cert.a));       // and the loop itself stays stable
    CHECK(cert.identity_residual <= 1e-8);
  }

  SECTION("ki = 0 certificates are rejected") {
    CircularLoopParams p = benchmark_loop();
    p.ki = 0.0;
    CHECK_THROWS_AS(lyapunov_certificate(p), PreconditionViolated);
  }
}

TEST_CASE("matrix checks") {
  CHECK(is_positive_definite(Eigen::Matrix2d::Identity()));
  Eigen::Matrix2d indef;
  indef << 1, 0, 0, -1;
  CHECK_FALSE(is_positive_definite(indef));
  Eigen::Matrix2d skew;
  skew << 0, 1, 0, 0;
  CHECK_THROWS_AS(is_positive_definite(skew), NotSymmetric);

  // eigenvalues inside the tolerance band do not count as definite
  Eigen::Matrix2d near_singular;
  near_singular << 5e-11, 0, 0, 1;
  CHECK_FALSE(is_positive_definite(near_singular));
  near_singular(0, 0) = 5e-10;
  CHECK(is_positive_definite(near_singular));

  Eigen::Matrix2d damped;
  damped << 0, 1, -1, -1;  // roots of z^2 + z + 1
  CHECK(is_hurwitz(damped));
  CHECK_FALSE(is_hurwitz(Eigen::Matrix2d::Identity()));
}

TEST_CASE("gain threshold for smooth fields") {
  SECTION("worked example") {
    const double thr = prop2_threshold(1, 2, 0.1, 0.1, 1, 0.5, M_PI / 3);
    CHECK(thr == Approx(2.8867513).epsilon(1e-6));
    // the cone branch alone is smaller
    CHECK(0.1 * 0.5 / (1.0 * std::sin(M_PI / 3) * (0.5 * 0.5 - 0.1)) ==
          Approx(0.3849002).epsilon(1e-6));
  }

  SECTION("margin infeasible when c1 reaches v gamma1 cos(eps)") {
    CHECK_THROWS_AS(prop2_threshold(1, 2, 0.1, 0.6, 1, 0.5, M_PI / 3), InfeasibleMargin);
    CHECK_THROWS_AS(prop2_threshold(1, 2, 0.1, 0.5, 1, 0.5, M_PI / 3), InfeasibleMargin);
  }

  SECTION("vanishing curvature leaves the gradient-ratio branch") {
    const double thr = prop2_threshold(1, 2, 0.0, 0.1, 1, 0.5, M_PI / 3);
    CHECK(thr == Approx(2.0 / std::sin(M_PI / 3)).epsilon(1e-12));
  }

  SECTION("angle domain") {
    CHECK_THROWS_AS(prop2_threshold(1, 2, 0.1, 0.1, 1, 0.5, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(prop2_threshold(1, 2, 0.1, 0.1, 1, 0.5, M_PI / 2), std::invalid_argument);
  }
}

TEST_CASE("steady-state error bound for smooth fields") {
  const double eps_angle = M_PI / 3;

  SECTION("worked example") {
    const double b = prop2_error_bound(10, 0.1, 1, 1, 2, 0.1, 0.5, eps_angle);
    CHECK(b == Approx(std::atanh(0.25 / (10 * 0.1 * std::sin(eps_angle)))).epsilon(1e-12));
    CHECK(b == Approx(0.29712).margin(1e-5));
  }

  SECTION("doubling kp better than halves the bound") {
    const double b1 = prop2_error_bound(10, 0.1, 1, 1, 2, 0.1, 0.5, eps_angle);
    const double b2 = prop2_error_bound(20, 0.1, 1, 1, 2, 0.1, 0.5, eps_angle);
    CHECK(b2 == Approx(0.14535).margin(1e-5));
    CHECK(b2 < 0.5 * b1);
  }

  SECTION("monotone in the gain and the field bounds") {
    double prev = prop2_error_bound(5, 0.1, 1, 1, 2, 0.1, 0.5, eps_angle);
    for (double kp : {7.0, 10.0, 20.0, 50.0, 1000.0, 1e6}) {
      const double b = prop2_error_bound(kp, 0.1, 1, 1, 2, 0.1, 0.5, eps_angle);
      CHECK(b < prev);
      prev = b;
    }
    CHECK(prev < 1e-5);  // kp -> infinity sends the bound to zero

    prev = 0.0;
    for (double g2 : {1.0, 2.0, 3.0, 4.0}) {
      const double b = prop2_error_bound(10, 0.1, 1, 1, g2, 0.1, 0.5, eps_angle);
      CHECK(b > prev);
      prev = b;
    }
    prev = 0.0;
    for (double g3 : {0.0, 0.1, 0.3, 0.5}) {
      const double b = prop2_error_bound(10, 0.1, 1, 1, 2, g3, 0.5, eps_angle);
      CHECK(b > prev);
      prev = b;
    }
  }

  SECTION("undefined below the threshold") {
    CHECK_THROWS_AS(prop2_error_bound(2, 0.1, 1, 1, 2, 0.1, 0.5, eps_angle), BoundUndefined);
  }
}

TEST_CASE("bounded scalar system") {
  SECTION("bound values") {
    CHECK(lemma1_bound(1.0, 0.5) == Approx(std::atanh(0.5)).epsilon(1e-14));
    CHECK(lemma1_bound(1.0, 0.5) == Approx(0.54931).margin(1e-5));
    CHECK(lemma1_bound(3.0, 0.0) == 0.0);
    CHECK_THROWS_AS(lemma1_bound(1.0, 1.0), BoundUndefined);
    CHECK_THROWS_AS(lemma1_bound(0.5, 1.0), PreconditionViolated);
    CHECK_THROWS_AS(lemma1_bound(1.0, -0.1), PreconditionViolated);
  }

  SECTION("trajectory settles at the bound") {
    const auto z = simulate_lemma1(1.0, 0.5, 2.0, 30.0, 0.01);
    CHECK(std::abs(z.back() - std::atanh(0.5)) < 1e-3);
  }

  SECTION("equilibrium start stays put") {
    const double zstar = std::atanh(0.5);
    const auto z = simulate_lemma1(1.0, 0.5, zstar, 10.0, 0.01);
    for (double zi : z) CHECK(zi == Approx(zstar).margin(1e-12));
  }

  SECTION("rise from below is monotone") {
    const auto z = simulate_lemma1(1.0, 0.5, -2.0, 30.0, 0.01);
    for (std::size_t i = 1; i < z.size(); ++i) CHECK(z[i] >= z[i - 1] - 1e-15);
    CHECK(z.back() <= std::atanh(0.5) + 1e-9);
  }

  SECTION("preconditions") {
    CHECK_THROWS_AS(simulate_lemma1(0.5, 1.0, 0.0, 10.0, 0.01), PreconditionViolated);
    CHECK_THROWS_AS(simulate_lemma1(1.0, 0.5, 0.0, 10.0, 0.05), PreconditionViolated);
    CHECK_THROWS_AS(simulate_lemma1(1.0, 0.5, 0.0, 10.0, 0.0), NonpositiveStep);
  }

  SECTION("tails never exceed the bound across random draws") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> uk(0.5, 5.0), ufrac(0.05, 0.9), uz(-3.0, 3.0);
    for (int i = 0; i < 20; ++i) {
      const double k = uk(rng);
      const double b = ufrac(rng) * k;
      const double z0 = uz(rng);
      const double rate = k * (1.0 - (b / k) * (b / k));
      const double t_final = 30.0 / k + 15.0 / rate + 2.0 * std::abs(z0);
      const auto z = simulate_lemma1(k, b, z0, t_final, 0.01 / k);
      double tail_max = 0.0;
      for (std::size_t j = 3 * z.size() / 4; j < z.size(); ++j)
        tail_max = std::max(tail_max, std::abs(z[j]));
      CHECK(tail_max <= lemma1_bound(k, b) + 1e-3);
    }
  }
}
