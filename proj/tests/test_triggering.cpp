#include "etse/triggering.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace etse;

namespace {

// tau_MIET = integral over [lambda, 1/lambda] of dphi / (2 L phi + gamma (phi^2 + 1)).
double simpson_miet(double L, double gamma, double lambda, int panels = 200000) {
  const double a = lambda, b = 1.0 / lambda, h = (b - a) / panels;
  auto f = [&](double phi) { return 1.0 / (2.0 * L * phi + gamma * (phi * phi + 1.0)); };
  double sum = f(a) + f(b);
  for (int k = 1; k < panels; ++k) sum += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  return sum * h / 3.0;
}

}  // namespace

TEST_CASE("closed-form MIET reference values") {
  CHECK(compute_miet(0.0, 6.1623, 0.7) == doctest::Approx(0.056690585985).epsilon(1e-10));
  CHECK(std::abs(compute_miet(0.0, 6.1623, 0.7) - 0.0566) < 1e-3);
  CHECK(compute_miet(1.0, 1.0, 0.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(compute_miet(2.0, 1.0, 0.5) == doctest::Approx(0.2250283335).epsilon(1e-9));
  CHECK(compute_miet(5.0, 0.1, 0.05) == doctest::Approx(0.56289138392).epsilon(1e-9));
  CHECK(compute_miet(0.3, 10.0, 0.95) == doctest::Approx(0.00497781274).epsilon(1e-8));
}

TEST_CASE("closed form agrees with quadrature of the timer ODE") {
  for (auto [L, g, lam] : {std::tuple{0.0, 6.1623, 0.7}, std::tuple{1.0, 1.0, 0.5}, std::tuple{2.0, 1.0, 0.5},
                           std::tuple{0.5, 3.0, 0.2}, std::tuple{4.0, 0.3, 0.9}, std::tuple{5.0, 0.1, 0.05}}) {
    CAPTURE(L);
    CAPTURE(g);
    CAPTURE(lam);
    CHECK(std::abs(compute_miet(L, g, lam) - simpson_miet(L, g, lam)) < 1e-10);
  }
}

TEST_CASE("ODE oracle agrees with the closed form on a random grid") {
  std::mt19937_64 rng(20240917);
  std::uniform_real_distribution<double> Ld(0.0, 5.0), gd(0.1, 10.0), ld(0.05, 0.95);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double L = k % 10 == 0 ? 0.0 : Ld(rng);
    const double g = k % 7 == 0 && L > 0.1 ? L : gd(rng);
    const double lam = ld(rng);
    worst = std::max(worst, std::abs(compute_miet(L, g, lam) - phi_ode_oracle(L, g, lam)));
  }
  CHECK(worst <= 1e-8);
  CHECK(phi_ode_oracle(1.0, 1.0, 0.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
}

TEST_CASE("MIET is strictly decreasing in each parameter") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> Ld(0.0, 5.0), gd(0.1, 10.0), ld(0.05, 0.9);
  for (int k = 0; k < 50; ++k) {
    const double L = Ld(rng), g = gd(rng), lam = ld(rng);
    const double base = compute_miet(L, g, lam);
    CHECK(compute_miet(L, g * 1.01, lam) < base);
    CHECK(compute_miet(L * 1.01 + 1e-3, g, lam) < base);
    CHECK(compute_miet(L, g, lam + 0.01) < base);
  }
}

TEST_CASE("branches join continuously at gamma = L") {
  for (double L : {0.5, 2.0, 7.0}) {
    for (double lam : {0.1, 0.5, 0.9}) {
      const double mid = compute_miet(L, L, lam);
      CHECK(mid == doctest::Approx((1.0 - lam) / (1.0 + lam) / L).epsilon(1e-14));
      for (double d : {1e-4, 1e-6, 1e-8}) {
        CAPTURE(d);
        for (double g : {L * (1 + d), L * (1 - d)}) {
          const double tau = compute_miet(L, g, lam);
          // Both outer branches stay accurate next to the switch and move at most O(d) from it.
          CHECK(std::abs(tau - simpson_miet(L, g, lam)) <= 1e-10);
          CHECK(std::abs(tau - mid) <= 2.0 * d * mid);
        }
      }
    }
  }
  // L -> 0 approaches the dedicated limit.
  CHECK(std::abs(compute_miet(1e-9, 6.1623, 0.7) - compute_miet(0.0, 6.1623, 0.7)) < 1e-9);
}

TEST_CASE("pathological tuning is reported") {
  CHECK_THROWS_AS(compute_miet(0.0, 1.0, 1.0), NumericalFailure);
}

TEST_CASE("phi stays in [lambda, 1/lambda] and freezes after tau_MIET") {
  const double L = 1.5, g = 2.0, lam = 0.4;
  const double tm = compute_miet(L, g, lam);
  const PhiTrajectory tr = phi_trajectory(L, g, lam, 3.0 * tm);
  REQUIRE(tr.tau.size() > 3);
  CHECK(tr.phi.front() == doctest::Approx(1.0 / lam));
  for (std::size_t k = 0; k < tr.tau.size(); ++k) {
    CHECK(tr.phi[k] >= lam - 1e-9);
    CHECK(tr.phi[k] <= 1.0 / lam + 1e-12);
    if (tr.tau[k] >= tm) CHECK(tr.phi[k] == doctest::Approx(lam).epsilon(1e-8));
    CHECK(phi_value(L, g, lam, tr.tau[k]) == doctest::Approx(tr.phi[k]).epsilon(1e-7));
  }
  CHECK(phi_value(0.0, 6.1623, 0.7, 0.0) == doctest::Approx(1.0 / 0.7));
}

TEST_CASE("phi_value branches match the ODE") {
  for (auto [L, g] : {std::pair{0.0, 3.0}, std::pair{2.0, 2.0}, std::pair{3.0, 1.0}, std::pair{1.0, 4.0}}) {
    const double lam = 0.3;
    const PhiTrajectory tr = phi_trajectory(L, g, lam, compute_miet(L, g, lam));
    for (std::size_t k = 0; k < tr.tau.size(); ++k)
      CHECK(phi_value(L, g, lam, tr.tau[k]) == doctest::Approx(tr.phi[k]).epsilon(1e-7));
  }
}

TEST_CASE("omega selection") {
  CHECK(omega(0.5 * 0.0567, 0.0567) == 0);
  CHECK(omega(2.0 * 0.0567, 0.0567) == 1);
  CHECK(omega(0.0567, 0.0567) == 1);
}

TEST_CASE("gamma_bar and beta") {
  CHECK(gamma_bar(6.1623, 0.7, 0.0) == doctest::Approx(56.5811725221).epsilon(1e-10));
  CHECK(beta_coeff(1.0, 1.0) == 2.0);
  CHECK(gamma_bar(2.0, 0.5, 3.0) == doctest::Approx(2 * 2 * 0.5 * 3 + 4 * 1.25));
}

TEST_CASE("trigger rate") {
  NodeTriggerParams p = make_node_params(0.0, 6.1623, 0.7, 1);
  p.output_weight = Matrix::Constant(1, 1, 2.0);
  p.sigma = 0.05;
  const Vector zero = Vector::Zero(1);
  CHECK(psi_rate(p, zero, zero, 0.0, 0.0) == 0.0);

  const Vector q = Vector::Constant(1, 0.1), et = Vector::Constant(1, 0.05);
  CHECK(psi_rate(p, q, et, 2.0 * p.tau_miet, 0.01) == doctest::Approx(-0.2634058626).epsilon(1e-9));
  // Before tau_MIET the negative noise term is switched off.
  CHECK(psi_rate(p, q, et, 0.5 * p.tau_miet, 0.0) == doctest::Approx(0.02));
  CHECK(psi_rate(p, zero, et, 0.5 * p.tau_miet, 0.0) >= 0.0);
  p.space_reg = 2e-4;
  CHECK(psi_rate(p, zero, zero, 0.0, 0.0) == doctest::Approx(2e-4));
}

TEST_CASE("reset policies") {
  NodeTriggerParams p = make_node_params(0.0, 6.1623, 0.7, 1);
  p.w_bar = 1e-3;
  CHECK(eta_reset(p, Vector::Constant(1, 0.3)) == 0.0);
  p.reset = ResetPolicy::noise_aware;
  CHECK(eta_reset(p, Vector::Constant(1, 0.0015)) == 0.0);
  CHECK(eta_reset(p, Vector::Constant(1, 0.01)) == doctest::Approx(2.7607104e-4).epsilon(1e-7));

  // Bound eta0 <= gamma lambda |eps|^2 whenever |w|, |what| <= w_bar.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const double eps = 0.01 * u(rng), w = 1e-3 * u(rng), what = 1e-3 * u(rng);
    const double eps_tilde = eps + what - w;
    CHECK(eta_reset(p, Vector::Constant(1, eps_tilde)) <= p.gain * p.lambda * eps * eps + 1e-18);
  }
}

TEST_CASE("jump conditions per mode") {
  NodeTriggerParams p = make_node_params(0.0, 6.1623, 0.7, 1);
  const double tm = p.tau_miet;
  CHECK_FALSE(jump_condition(p, 2 * tm, 0.1));
  CHECK(jump_condition(p, tm, 0.0));
  CHECK_FALSE(jump_condition(p, 0.99 * tm, 0.0));
  p.mode = TriggerMode::time_triggered;
  CHECK(jump_condition(p, tm, 0.1));
  CHECK_FALSE(jump_condition(p, 0.5 * tm, 0.0));
  p.mode = TriggerMode::periodic;
  p.period = 0.04;
  CHECK(jump_condition(p, 0.04, 5.0));
  CHECK_FALSE(jump_condition(p, 0.039, 0.0));
}

TEST_CASE("parameter validation") {
  NodeTriggerParams p = make_node_params(1.0, 2.0, 0.5, 2);
  CHECK_NOTHROW(validate(p, 2, "nodes[0]"));
  CHECK_THROWS_WITH_AS(validate(p, 1, "nodes[0]"), doctest::Contains("nodes[0].Q"), ConfigError);
  auto bad = p;
  bad.lambda = 1.2;
  CHECK_THROWS_WITH_AS(validate(bad, 2, "n"), doctest::Contains("n.lambda"), ConfigError);
  bad = p;
  bad.tau_miet *= 1.01;
  CHECK_THROWS_WITH_AS(validate(bad, 2, "n"), doctest::Contains("n.tau_miet"), ConfigError);
  bad = p;
  bad.tau_miet *= 0.5;
  CHECK_NOTHROW(validate(bad, 2, "n"));
  bad = p;
  bad.mode = TriggerMode::periodic;
  bad.period = 2 * p.tau_miet;
  CHECK_THROWS_WITH_AS(validate(bad, 2, "n"), doctest::Contains("n.period"), ConfigError);
  bad = p;
  bad.output_weight = -Matrix::Identity(2, 2);
  CHECK_THROWS_AS(validate(bad, 2, "n"), ConfigError);
}
