#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "flexmatch/ks.hpp"
#include "oracles.hpp"

using namespace flexmatch;

TEST_CASE("fixed point is reached and satisfies the map") {
  for (FlexAllocation b : {FlexAllocation{1, 0}, FlexAllocation{0.5, 0.5}, FlexAllocation{0.3, 0.9}}) {
    auto s = solve_ks_fixed_point(0.4, 1.5, b);
    CHECK(s.residual < 1e-12);
    CHECK(sup_dist(ks_map(0.4, 1.5, b, s.y), s.y) < 1e-11);
    CHECK(s.mu_ks == std::min(s.xi, s.xi_hat));
    CHECK(s.mu_ks > 0);
    CHECK(s.mu_ks <= 1);
  }
}

TEST_CASE("one-sided value at the reference point") {
  auto s = solve_ks_fixed_point(0.0, 1.0, {1, 0});
  CHECK(s.mu_ks == doctest::Approx(oracle::one_sided_ks_oracle(1.0)).epsilon(1e-9));
  CHECK(s.mu_ks == doctest::Approx(0.5440619).epsilon(1e-6));
}

TEST_CASE("one-sided full solve agrees with the scalar oracle") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 60; ++t) {
    double a = 1.3 * u(rng), af = a + (std::exp(1.0) - 2 * a) * (0.05 + 0.9 * u(rng));
    if (!(a + af < std::exp(1.0))) continue;
    CHECK(mu_ks(a, af, {1, 0}) == doctest::Approx(oracle::one_sided_ks_oracle(a + af)).epsilon(1e-8));
  }
}

TEST_CASE("reduced solves reproduce the full solve") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 60; ++t) {
    double a = 1e-3 + 1.2 * u(rng), af = a + 0.05 + (std::exp(1.0) - 2 * a - 0.1) * u(rng);
    if (!in_certified_regime(a, af)) continue;
    auto one = solve_reduced_one_sided(a, af, 1e-13);
    auto bal = solve_reduced_balanced(a, af, 1e-13);
    CHECK(one.certified);
    CHECK(bal.certified);
    CHECK(mu_one_sided_from_x(a, af, one.x) == doctest::Approx(mu_ks(a, af, {1, 0})).epsilon(1e-8));
    CHECK(mu_balanced_from_x(a, af, bal.x1, bal.x2) ==
          doctest::Approx(mu_ks(a, af, {0.5, 0.5})).epsilon(1e-8));
  }
}

TEST_CASE("swapping the allocation swaps the sides") {
  auto s = solve_ks_fixed_point(0.2, 1.8, {0.8, 0.3});
  auto t = solve_ks_fixed_point(0.2, 1.8, {0.3, 0.8});
  CHECK(s.xi == doctest::Approx(t.xi_hat).epsilon(1e-10));
  CHECK(s.mu_ks == doctest::Approx(t.mu_ks).epsilon(1e-10));
}

TEST_CASE("iterates from zero rise monotonically") {
  KsVector w;
  for (int i = 0; i < 200; ++i) {
    auto nw = ks_map(0.3, 2.0, {0.6, 0.4}, w);
    auto a = w.as_array(), b = nw.as_array();
    for (int k = 0; k < 8; ++k) CHECK(b[k] >= a[k] - 1e-15);
    w = nw;
  }
}

TEST_CASE("exactly critical corner converges") {
  const double af = std::exp(1.0) / 2;
  for (FlexAllocation b : {FlexAllocation{1, 1}, FlexAllocation{0.9, 1}}) {
    auto s = solve_ks_fixed_point(1e-6, af, b);
    CHECK(s.residual < 1e-12);
    CHECK(s.mu_ks > 0.5);
    CHECK(s.mu_ks < 1);
  }
  CHECK(solve_ks_fixed_point(1e-6, af, {1, 1}).accelerated);
}

TEST_CASE("solver errors") {
  CHECK_THROWS_AS(solve_ks_fixed_point(0.4, 1.5, {0.5, 0.5}, 1e-12, 3), NonConvergence);
  CHECK_THROWS_AS(solve_ks_fixed_point(1.5, 1.0, {0.5, 0.5}), InvalidParams);
  CHECK_THROWS_AS(solve_ks_fixed_point(0.4, 1.5, {1.5, 0.5}), InvalidParams);
  CHECK_THROWS_AS(solve_ks_fixed_point(0.4, 1.5, {0.5, 0.5}, 0.0), InvalidParams);
}

TEST_CASE("closed-form second derivatives agree with finite differences") {
  const double h = 1e-3;
  for (auto [a, af] : {std::pair{0.1, 1.0}, std::pair{0.3, 1.2}, std::pair{0.05, 0.6},
                       std::pair{0.5, 1.5}}) {
    auto mu = [&](double bl, double br) { return mu_ks(a, af, {bl, br}, 1e-14); };
    double m0 = mu(0.5, 0.5);
    double diag = (mu(0.5 + h, 0.5 - h) - 2 * m0 + mu(0.5 - h, 0.5 + h)) / (h * h);
    double budget = (mu(0.5, 0.5 + h) - 2 * m0 + mu(0.5, 0.5 - h)) / (h * h);
    auto sod = directional_sod_balanced(a, af);
    CHECK(sod.sod_diag == doctest::Approx(diag).epsilon(1e-3));
    CHECK(sod.sod_budget == doctest::Approx(budget).epsilon(1e-3));
  }
}
