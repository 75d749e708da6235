#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "flexmatch/analytic.hpp"
#include "flexmatch/estimator.hpp"
#include "oracles.hpp"

using namespace flexmatch;

TEST_CASE("closed-form phi agrees with the isolation definition") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 500; ++t) {
    double a = 3 * u(rng), af = a + 5 * u(rng), bl = u(rng), br = u(rng);
    CHECK(phi_closed_form(a, af, {bl, br}).phi ==
          doctest::Approx(oracle::phi_from_definition(a, af, bl, br)).epsilon(1e-12));
  }
}

TEST_CASE("phi is symmetric under swapping sides") {
  auto a = phi_closed_form(0.3, 2.0, {0.7, 0.1});
  auto b = phi_closed_form(0.3, 2.0, {0.1, 0.7});
  CHECK(a.phi1 == doctest::Approx(b.phi2));
  CHECK(a.phi == doctest::Approx(b.phi));
}

TEST_CASE("criterion sign picks the better of the two candidates on the budget line") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 1);
  int checked = 0;
  for (int t = 0; t < 400; ++t) {
    double a = 2 * u(rng), af = a + 6 * u(rng), B = u(rng);
    double crit = phi_criterion(a, af, B);
    if (std::fabs(crit) < 1e-9) continue;
    double one = oracle::phi_from_definition(a, af, B, 0);
    double bal = oracle::phi_from_definition(a, af, B / 2, B / 2);
    double best = -1;
    for (int i = 0; i <= 100; ++i) {
      double bl = B * i / 100;
      best = std::max(best, oracle::phi_from_definition(a, af, bl, B - bl));
    }
    // the maximum over the line is attained at one of the two candidates
    CHECK(best <= std::max(one, bal) + 1e-12);
    auto o = phi_optimal_allocation(a, af, B);
    CHECK(o == (one > bal ? Optimal::one_sided : Optimal::balanced));
    ++checked;
  }
  CHECK(checked > 300);
}

TEST_CASE("homogeneous intensities make every split a tie") {
  CHECK(phi_optimal_allocation(0.7, 0.7, 0.5) == Optimal::tie);
  CHECK(phi_optimal_allocation(0.7, 2.0, 0.0) == Optimal::tie);
  CHECK_THROWS_AS(phi_optimal_allocation(0.7, 2.0, 1.5), InvalidParams);
  CHECK_THROWS_AS(phi_optimal_allocation(0.7, 0.5, 0.5), InvalidParams);
}

TEST_CASE("local model: chain solution equals the expanded rational form") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 300; ++t) {
    double pf = 0.5 * u(rng), p = pf * u(rng);
    if (pf <= p) continue;
    FlexAllocation a{u(rng), u(rng)};
    CHECK(local_model_mu(p, pf, a) == doctest::Approx(local_model_mu_rational(p, pf, a)).epsilon(1e-9));
  }
}

TEST_CASE("local model without flexibility") {
  for (double p : {0.05, 0.25, 0.4}) CHECK(local_model_mu(p, 0.5, {0, 0}) == doctest::Approx(4 * p / (1 + 2 * p)));
  CHECK_THROWS_AS(local_model_mu(0.3, 0.6, {0, 0}), InvalidParams);
  CHECK_THROWS_AS(local_model_mu(0.3, 0.2, {0, 0}), InvalidParams);
}

TEST_CASE("local model: one-sided beats balanced") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 200; ++t) {
    double pf = 0.5 * u(rng), p = pf * u(rng), B = 0.05 + 0.95 * u(rng);
    if (!(pf > p + 1e-6)) continue;
    CHECK(local_model_mu(p, pf, {B, 0}) > local_model_mu(p, pf, {B / 2, B / 2}));
  }
}

TEST_CASE("local model matches simulation") {
  const double p = 0.15, pf = 0.4;
  for (FlexAllocation a : {FlexAllocation{0.6, 0}, FlexAllocation{0.3, 0.3}}) {
    ModelParams mp{p * 2, pf * 2, 5000, 2};
    auto e = estimate({Variant::local, mp, a, 300, {Metric::mu}, 8, 0}).values[0];
    CHECK(std::fabs(e.mean - local_model_mu(p, pf, a)) < 4 * e.std_err + 1e-3);
  }
}

TEST_CASE("thresholds") {
  CHECK(alpha_star(0.6) == doctest::Approx(0.6 * 0.6 / (8 * 0.7 * 0.7 * 0.7)));
  auto t = asymmetry_thresholds(0.6, 0.05);
  REQUIRE(t.alpha_f_star);
  CHECK(*t.alpha_f_star == doctest::Approx(13.2687).epsilon(1e-5));
  CHECK_FALSE(asymmetry_thresholds(0.6, 0.2).alpha_f_star);
  CHECK_FALSE(asymmetry_thresholds(0.6, 0.0).alpha_f_star);
  CHECK_THROWS_AS(alpha_star(1.0), InvalidParams);
  CHECK_THROWS_AS(alpha_star(0.0), InvalidParams);
  CHECK(cannibalization_gap_bound(2.0) == doctest::Approx(8.0 / 32 * std::exp(-14.0)));
}
