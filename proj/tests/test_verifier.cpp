#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "flexmatch/verifier.hpp"

using namespace flexmatch;

namespace {
double gap(double a, double af) { return mu_ks(a, af, {1, 0}) - mu_ks(a, af, {0.5, 0.5}); }
}  // namespace

TEST_CASE("comparison certificate never exceeds the true gap anywhere in its cell") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0, 1);
  int in = 0;
  for (int t = 0; t < 100; ++t) {
    double d = 0.002 + 0.05 * u(rng), a = 1e-3 + 0.6 * u(rng), af = a + d + 2 * u(rng);
    auto c = certify_comparison_cell(a, af, d);
    if (c.verdict == Verdict::out_of_regime) continue;
    ++in;
    for (double s : {0.0, 0.5, 0.999})
      for (double r : {0.0, 0.5, 0.999}) CHECK(c.lower_bound_gap <= gap(a + s * d, af + r * d) + 1e-9);
  }
  CHECK(in > 30);
}

TEST_CASE("tiny cells recover the pointwise gap") {
  for (auto [a, af] : {std::pair{0.1, 1.0}, std::pair{0.3, 1.8}, std::pair{0.01, 0.5}}) {
    auto c = certify_comparison_cell(a, af, 1e-9, 1e-12);
    REQUIRE(c.verdict != Verdict::out_of_regime);
    CHECK(c.lower_bound_gap == doctest::Approx(gap(a, af)).epsilon(1e-4));
  }
}

TEST_CASE("a verified cell stays verified when refined") {
  auto r = certify_comparison_region(0.02, 1e-8, 1e-4, 0.5, 1.0, 2.0, 0);
  int seen = 0;
  for (const auto& c : r.cells) {
    if (c.verdict != Verdict::verified) continue;
    ++seen;
    for (double s : {0.0, 0.01})
      for (double q : {0.0, 0.01})
        CHECK(certify_comparison_cell(c.alpha + s, c.alpha_f + q, 0.01).verdict == Verdict::verified);
  }
  CHECK(seen > 0);
}

TEST_CASE("region bookkeeping") {
  auto empty = certify_comparison_region(0.01, 1e-8, 1.0, 0.5, 1.0, 2.0);
  CHECK(empty.cells.empty());
  CHECK(certificates_to_csv(empty.cells) == std::string(certificate_csv_header()) + "\n");
  auto r = certify_comparison_region(0.05, 1e-8, 1e-4, 0.5, 1.0, 2.0, 2);
  CHECK(r.verified + r.unverified + r.out_of_regime == static_cast<int>(r.cells.size()));
  auto out = certify_comparison_cell(1.0, 2.0, 0.01);  // a + af > e
  CHECK(out.verdict == Verdict::out_of_regime);
  CHECK(std::isnan(out.lower_bound_gap));
  auto r1 = certify_comparison_region(0.05, 1e-8, 1e-4, 0.5, 1.0, 2.0, 1);
  CHECK(certificates_to_csv(r.cells) == certificates_to_csv(r1.cells));
}

TEST_CASE("sod certificates agree with finite differences where verified") {
  auto r = certify_sod_region(0.05, 1e-8, 0);
  REQUIRE(r.interior > 0);
  CHECK(r.both_verified + r.convex_only + r.concave_only + r.neither == r.interior);
  const double h = 1e-3;
  int checked = 0;
  for (std::size_t i = 0; i < r.cells.size(); i += 7) {
    const auto& c = r.cells[i];
    auto mu = [&](double bl, double br) { return mu_ks(c.alpha, c.alpha_f, {bl, br}, 1e-14); };
    double m0 = mu(0.5, 0.5);
    if (c.convex_verified) {
      CHECK((mu(0.5 + h, 0.5 - h) - 2 * m0 + mu(0.5 - h, 0.5 + h)) / (h * h) > 0);
      CHECK(c.convex_lb <= directional_sod_balanced(c.alpha, c.alpha_f).sod_diag);
    }
    if (c.concave_verified) CHECK((mu(0.5, 0.5 + h) - 2 * m0 + mu(0.5, 0.5 - h)) / (h * h) < 0);
    ++checked;
  }
  CHECK(checked > 5);
  // the concave expression is a sign test rather than a value bound, so compare signs only
  for (const auto& c : r.cells) {
    auto sod = directional_sod_balanced(c.alpha, c.alpha_f);
    if (c.convex_verified) CHECK(sod.sod_diag > 0);
    if (c.concave_verified) CHECK(sod.sod_budget < 0);
  }
  CHECK_THROWS_AS(certify_sod_region(0.0, 1e-8), InvalidParams);
}

TEST_CASE("f1 derivative bound") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 200; ++t) {
    double a = 1e-3 + 1.2 * u(rng), af = a + 0.01 + (std::exp(1.0) - 2 * a - 0.02) * u(rng);
    if (!(a + af < std::exp(1.0))) continue;
    double x = 0.02 + 0.95 * u(rng), h = 1e-6;
    double fd = (reduced_f1(a, af, x + h) - reduced_f1(a, af, x - h)) / (2 * h);
    CHECK(f1_derivative_lower_bound(a, af, x, 0, 0) == doctest::Approx(fd).epsilon(1e-5));
  }
  auto sw = f1_monotonicity_sweep(0.05, 0.05, 0);
  CHECK(sw.cells > 0);
  CHECK(sw.verified + static_cast<long>(sw.failures.size()) == sw.cells);
}

TEST_CASE("coupling inequality holds") {
  auto ex = coupling_exhaustive(6, 2);
  CHECK(ex.cases == 1 + 36 + 36 * 35 / 2);
  CHECK(ex.violations == 0);
  auto rep = coupling_inequality_check(60, 2.0, 7, 300);
  CHECK(rep.violations == 0);
  CHECK(rep.mean_gap >= 0);
  auto t1 = coupling_inequality_check(60, 2.0, 7, 50, default_matcher, 1);
  auto t4 = coupling_inequality_check(60, 2.0, 7, 50, default_matcher, 4);
  CHECK(t1.to_json().dump() == t4.to_json().dump());
  CHECK_THROWS_AS(coupling_inequality_check(7, 2.0, 7, 10), InvalidParams);
}

TEST_CASE("a broken matcher is caught") {
  MatcherFn bad = [](const BipartiteGraph& g) { return -max_matching_size(g); };
  CHECK(coupling_exhaustive(4, 2, bad).violations > 0);
  CHECK(coupling_inequality_check(60, 2.0, 7, 100, bad).violations > 0);
}
