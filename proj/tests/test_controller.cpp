#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "isoline/controller.hpp"
#include "isoline/simulator.hpp"

using namespace isoline;
using Catch::Approx;

namespace {

ControllerParams table_gains(double kp, double ki, double c1, double c2) {
  ControllerParams p;
  p.kp = kp;
  p.ki = ki;
  p.c1 = c1;
  p.c2 = c2;
  p.derivative_mode = DerivativeMode::Oracle;
  return p;
}

}  // namespace

TEST_CASE("error term") {
  CHECK(error_term(0.0, 0.0, 0.5, 2.0) == 0.0);
  CHECK(error_term(1.0, 0.0, 0.2, 1.0) == Approx(0.2 * std::tanh(1.0)).epsilon(1e-14));
  CHECK(error_term(1.0, 0.0, 0.2, 1.0) == Approx(0.15232).margin(1e-5));
  CHECK(error_term(1e9, 0.0, 0.2, 1.0) == Approx(0.2).epsilon(1e-14));
  CHECK(error_term(-1e9, 0.0, 0.2, 1.0) == Approx(-0.2).epsilon(1e-14));

  SECTION("drift off the measured rate never exceeds c1") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-50, 50);
    for (int i = 0; i < 1000; ++i) {
      const double eps = u(rng), eps_dot = u(rng);
      CHECK(std::abs(error_term(eps, eps_dot, 0.7, 1.3) - eps_dot) <=
            0.7 + 1e-12 * (1.0 + std::abs(eps_dot)));
    }
  }
}

TEST_CASE("dirty derivative") {
  const double dt = 0.01, tau = 0.05;

  SECTION("constant input decays geometrically to zero") {
    const double a = tau / (tau + dt);
    double est = 1.0;
    for (int i = 0; i < 20; ++i) {
      const double next = dirty_derivative(est, 4.2, 4.2, dt, tau);
      CHECK(next == Approx(a * est).epsilon(1e-14));
      est = next;
    }
    CHECK(std::abs(est) < std::pow(a, 20) + 1e-12);
  }

  SECTION("ramp: unit slope recovered within 1% after 0.5 s") {
    double est = 0.0, prev = 0.0;
    for (int i = 1; i <= 50; ++i) {
      const double eps = i * dt;
      est = dirty_derivative(est, prev, eps, dt, tau);
      prev = eps;
    }
    CHECK(est == Approx(1.0).epsilon(0.01));
  }

  SECTION("tracks cos t when fed sin t at 100 Hz") {
    double est = 0.0, prev = 0.0, worst = 0.0;
    for (int i = 1; i <= 3000; ++i) {
      const double t = i * dt;
      const double eps = std::sin(t);
      est = dirty_derivative(est, prev, eps, dt, tau);
      prev = eps;
      if (t >= 0.5) worst = std::max(worst, std::abs(est - std::cos(t)));
    }
    CHECK(worst < 0.06);
  }
}

TEST_CASE("controller update") {
  SECTION("zero error holds zero command indefinitely") {
    auto params = table_gains(10, 1, 0.2, 1);
    ControllerState st = reset();
    for (int i = 0; i < 100; ++i) {
      const auto out = update(st, params, 10.0, 10.0, 0.01, 0.0);
      CHECK(out.omega == 0.0);
    }
    CHECK(st.sigma == 0.0);
  }

  SECTION("static gain arithmetic") {
    // kp = 10, c1 = 0.1, eps = 1, eps' = 0 -> omega = tanh(1) ~ 0.76159
    auto params = table_gains(10, 0, 0.1, 1);
    ControllerState st = reset();
    const auto out = update(st, params, 11.0, 10.0, 1e-9, 0.0);
    CHECK(out.omega == Approx(std::tanh(1.0)).epsilon(1e-12));
    CHECK(out.omega == Approx(0.76159).margin(5e-6));
  }

  SECTION("missing oracle value") {
    auto params = table_gains(10, 1, 0.2, 1);
    ControllerState st = reset();
    CHECK_THROWS_AS(update(st, params, 1.0, 0.0, 0.01), MissingOracle);
    params.derivative_mode = DerivativeMode::DirtyDerivative;
    params.tau_f = 0.05;
    CHECK_THROWS_AS(update(st, params, 1.0, 0.0, 0.01, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(update(st, params, 1.0, 0.0, 0.0), NonpositiveStep);
  }

  SECTION("first dirty-derivative call only primes the filter") {
    ControllerParams params = table_gains(10, 1, 0.2, 1);
    params.derivative_mode = DerivativeMode::DirtyDerivative;
    params.tau_f = 0.05;
    ControllerState st = reset();
    const auto out = update(st, params, 12.0, 10.0, 0.01);
    CHECK(out.epsilon_dot == 0.0);
    CHECK(st.initialized);
    CHECK(st.prev_epsilon == 2.0);

    SECTION("reset returns to first-call behavior") {
      update(st, params, 13.0, 10.0, 0.01);
      st = reset();
      CHECK(st.sigma == 0.0);
      CHECK_FALSE(st.initialized);
      const auto again = update(st, params, 12.0, 10.0, 0.01);
      CHECK(again.omega == out.omega);
      CHECK(again.epsilon_dot == 0.0);
    }
  }

  SECTION("integrator is linear in the error term") {
    auto params = table_gains(5, 2, 0.3, 1);
    ControllerState a = reset(), b = reset();
    // same eps' scale trick: feed rates 1 and 2 with eps = 0
    update(a, params, 0.0, 0.0, 0.1, 1.0);
    update(b, params, 0.0, 0.0, 0.1, 2.0);
    CHECK(b.sigma == Approx(2.0 * a.sigma).epsilon(1e-14));
  }

  SECTION("with ki = 0 the command is a pure function of (eps, eps')") {
    auto params = table_gains(7, 0, 0.2, 1.5);
    ControllerState fresh = reset(), worn = reset();
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int i = 0; i < 50; ++i) update(worn, params, u(rng), 0.0, 0.05, u(rng));
    const auto a = update(fresh, params, 1.7, 0.0, 0.05, -0.4);
    const auto b = update(worn, params, 1.7, 0.0, 0.05, -0.4);
    CHECK(a.omega == b.omega);
  }

  SECTION("command is Lipschitz in the error: slope at most kp c1 / c2") {
    auto params = table_gains(10, 0, 0.2, 0.7);
    for (double eps : {-2.0, -0.3, 0.0, 0.4, 3.0}) {
      const double delta = 1e-6;
      ControllerState s1 = reset(), s2 = reset();
      const auto o1 = update(s1, params, eps, 0.0, 0.01, 0.0);
      const auto o2 = update(s2, params, eps + delta, 0.0, 0.01, 0.0);
      CHECK(std::abs(o2.omega - o1.omega) <=
            params.kp * params.c1 * delta / params.c2 * (1 + 1e-9));
    }
  }

  SECTION("limits clamp the integrator and the command") {
    auto params = table_gains(10, 1, 0.2, 1);
    params.sigma_limit = 0.05;
    params.omega_limit = 1.5;
    ControllerState st = reset();
    for (int i = 0; i < 200; ++i) {
      const auto out = update(st, params, 15.0, 10.0, 0.1, 0.0);
      CHECK(std::abs(out.omega) <= 1.5);
    }
    CHECK(std::abs(st.sigma) <= 0.05 + 1e-15);
  }

  SECTION("parameter validation names the offending gain") {
    ControllerParams bad = table_gains(0, 1, 0.2, 1);
    CHECK_THROWS_WITH(bad.validate(), Catch::Matchers::ContainsSubstring("kp"));
    bad = table_gains(10, -1, 0.2, 1);
    CHECK_THROWS_WITH(bad.validate(), Catch::Matchers::ContainsSubstring("ki"));
    bad = table_gains(10, 1, 0.2, 1);
    bad.derivative_mode = DerivativeMode::DirtyDerivative;
    bad.tau_f = 0.0;
    CHECK_THROWS_WITH(bad.validate(), Catch::Matchers::ContainsSubstring("tau_f"));
  }
}

TEST_CASE("sliding surface attracts the error") {
  // With e held at 0 the error obeys eps' = -c1 tanh(eps/c2); integrate the
  // scalar dynamics from +-5 c2 and require monotone decay of |eps|.
  const double c1 = 0.2, c2 = 1.0, dt = 0.01;
  for (double start : {5.0 * c2, -5.0 * c2}) {
    double eps = start;
    double prev = std::abs(eps);
    for (int i = 0; i < 20000; ++i) {
      auto f = [&](double x) { return -c1 * std::tanh(x / c2); };
      const double k1 = f(eps), k2 = f(eps + dt / 2 * k1), k3 = f(eps + dt / 2 * k2),
                   k4 = f(eps + dt * k3);
      eps += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
      CHECK(std::abs(eps) <= prev + 1e-15);
      prev = std::abs(eps);
    }
    CHECK(std::abs(eps) < 1e-3);
  }
}

TEST_CASE("steady orbit settles the integrator at -v/r_d") {
  // Linear-in-distance field: the loop's equilibrium command is -v/r_d,
  // carried entirely by the integral term once e has died out.
  Scenario sc;
  sc.field = LinearRadialField(10.0, 0.5, 10.0, Vec2(0, 0));
  sc.s_d = 10.0;
  sc.initial = {0.0, 12.0, 0.0};
  sc.v = 0.5;
  sc.params.kp = 10;
  sc.params.ki = 1;
  sc.params.c1 = 0.2;
  sc.params.c2 = 1;
  sc.params.derivative_mode = DerivativeMode::DirtyDerivative;
  sc.params.tau_f = 0.05;
  sc.params.sigma_limit = 1.0;
  sc.sim_dt = sc.controller_dt = 0.01;
  sc.duration = 600.0;

  const Trajectory traj = run(sc);
  REQUIRE(traj.completed);
  const auto& last = traj.samples.back();
  const double target = -sc.v / 10.0;
  CHECK(std::abs(last.e) < 1e-3);
  CHECK(sc.params.ki * last.sigma == Approx(target).epsilon(0.01));
  CHECK(last.omega == Approx(target).epsilon(0.02));
}
