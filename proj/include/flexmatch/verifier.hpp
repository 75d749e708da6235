#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "analytic.hpp"
#include "estimator.hpp"
#include "ks.hpp"
#include "matching.hpp"
#include "parallel.hpp"

namespace flexmatch {

enum class Verdict { verified, unverified, out_of_regime };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::verified: return "verified";
    case Verdict::unverified: return "unverified";
    case Verdict::out_of_regime: return "out_of_regime";
  }
  return "?";
}

// absorbs round-to-nearest error in the bound evaluation
inline constexpr double kCertSlack = 1e-10;

struct CellCertificate {
  double alpha = 0, alpha_f = 0, delta = 0, eps = 0;
  double lower_bound_gap = 0;  // NaN when out of regime
  Verdict verdict = Verdict::out_of_regime;
};

// The whole cell [alpha, alpha+delta) x [alpha_f, alpha_f+delta) must sit inside the regime where
// the reduced solves are unique and the enclosures hold.
inline bool cell_in_regime(double alpha, double alpha_f, double delta) {
  return delta > 0 && delta < 0.5 && alpha > 1e-4 && alpha + delta <= alpha_f &&
         alpha + alpha_f + 2 * delta < std::exp(1.0);
}

struct SolutionBounds {
  double x_lb, x_ub, x1_lb, x1_ub, x2_lb, x2_ub;
};

inline SolutionBounds solution_bounds(double alpha, double alpha_f, double delta, double eps) {
  auto one = solve_reduced_one_sided(alpha, alpha_f, eps);
  auto bal = solve_reduced_balanced(alpha, alpha_f, eps);
  SolutionBounds s;
  s.x_lb = (one.x - eps) * (1 - 2 * delta);
  s.x_ub = one.x + eps;
  s.x1_lb = (bal.x1 - eps) * (1 - 2 * delta);
  s.x1_ub = bal.x1 + eps;
  s.x2_lb = bal.x2_lo * (1 - 2 * delta);
  s.x2_ub = bal.x2_hi;
  return s;
}

inline double one_sided_lower_bound(double a, double af, double delta, const SolutionBounds& s) {
  const double lam = a + af;
  return 2 - s.x_ub - std::exp(-lam * s.x_lb) * (1 + (lam + 2 * delta) * s.x_ub);
}

inline double balanced_upper_bound(double a, double af, double delta, const SolutionBounds& s) {
  const double lam = a + af, L = lam + 2 * delta;
  return 2 - 0.5 * s.x1_lb - 0.5 * s.x2_lb -
         0.5 * std::exp(-(af + delta) * s.x1_ub - 0.5 * L * s.x2_ub) *
             (1 + af * s.x1_lb + 0.5 * lam * s.x2_lb) -
         0.5 * std::exp(-0.5 * L * s.x1_ub - (a + delta) * s.x2_ub) *
             (1 + 0.5 * lam * s.x1_lb + a * s.x2_lb);
}

inline CellCertificate certify_comparison_cell(double alpha, double alpha_f, double delta,
                                               double eps = 1e-8) {
  CellCertificate c{alpha, alpha_f, delta, eps, std::nan(""), Verdict::out_of_regime};
  if (!cell_in_regime(alpha, alpha_f, delta) || !(eps > 0)) return c;
  auto s = solution_bounds(alpha, alpha_f, delta, eps);
  c.lower_bound_gap = one_sided_lower_bound(alpha, alpha_f, delta, s) -
                      balanced_upper_bound(alpha, alpha_f, delta, s) - kCertSlack;
  c.verdict = c.lower_bound_gap > 0 ? Verdict::verified : Verdict::unverified;
  return c;
}

// integer multiples k*delta inside [lo, hi]
inline std::vector<double> delta_anchors(double lo, double hi, double delta) {
  std::vector<double> out;
  if (!(delta > 0) || hi < lo) return out;
  long k0 = static_cast<long>(std::ceil(lo / delta - 1e-9));
  long k1 = static_cast<long>(std::floor(hi / delta + 1e-9));
  for (long k = std::max(k0, 0L); k <= k1; ++k) out.push_back(k * delta);
  return out;
}

struct RegionSummary {
  std::vector<CellCertificate> cells;
  int verified = 0, unverified = 0, out_of_regime = 0;
  // per alpha_f anchor: largest alpha anchor whose cell verified
  std::map<double, double> frontier;
  double verified_fraction() const {
    int in = verified + unverified;
    return in ? static_cast<double>(verified) / in : 0.0;
  }
};

inline RegionSummary certify_comparison_region(double delta, double eps, double alpha_lo,
                                               double alpha_hi, double alpha_f_lo,
                                               double alpha_f_hi, int threads = 0) {
  auto as = delta_anchors(alpha_lo, alpha_hi, delta);
  auto fs = delta_anchors(alpha_f_lo, alpha_f_hi, delta);
  RegionSummary r;
  r.cells.resize(as.size() * fs.size());
  parallel_for(r.cells.size(), threads, [&](std::size_t i) {
    r.cells[i] = certify_comparison_cell(as[i / fs.size()], fs[i % fs.size()], delta, eps);
  });
  for (const auto& c : r.cells) {
    if (c.verdict == Verdict::verified) {
      ++r.verified;
      auto [it, fresh] = r.frontier.emplace(c.alpha_f, c.alpha);
      if (!fresh) it->second = std::max(it->second, c.alpha);
    } else if (c.verdict == Verdict::unverified) {
      ++r.unverified;
    } else {
      ++r.out_of_regime;
    }
  }
  return r;
}

inline const char* certificate_csv_header() { return "alpha,alpha_f,delta,eps,lower_bound_gap,verdict"; }

inline std::string certificates_to_csv(const std::vector<CellCertificate>& cells) {
  std::string s = std::string(certificate_csv_header()) + "\n";
  for (const auto& c : cells)
    s += fmt_num(c.alpha) + "," + fmt_num(c.alpha_f) + "," + fmt_num(c.delta) + "," +
         fmt_num(c.eps) + "," + fmt_num(c.lower_bound_gap) + "," + to_string(c.verdict) + "\n";
  return s;
}

struct SodCertificate {
  double alpha = 0, alpha_f = 0, delta = 0, eps = 0;
  double convex_lb = 0, concave_ub = 0;
  bool convex_verified = false, concave_verified = false;
  bool in_regime = false;
};

inline double convex_lower_bound(double a, double af, double d, const SolutionBounds& s) {
  const double gp = af - a + d, gm = std::max(af - a - d, 0.0);
  double num = -gp * gp * 4 * s.x1_ub * s.x2_ub * (s.x1_ub + s.x2_ub) +
               16 * std::max(0.0, s.x2_lb - s.x1_ub) * af * s.x1_lb -
               16 * (s.x2_ub - s.x1_lb) * (a + d) * s.x2_ub;
  double den = -gm * gm * s.x1_lb * s.x2_lb + 4 * (1 - a * s.x2_lb - af * s.x1_lb);
  return num / den;
}

inline double concave_upper_bound(double a, double af, double d, const SolutionBounds& s) {
  const double gp = af - a + d, gm = std::max(0.0, af - a - d), lam = af + a;
  const double qu = s.x1_ub * s.x2_ub * gp * gp, ql = s.x1_lb * s.x2_lb * gm * gm;
  double den = -qu * qu + 8 * lam * lam * s.x1_lb * s.x2_lb + 16 * a * a * s.x2_lb * s.x2_lb +
               16 * af * af * s.x1_lb * s.x1_lb - 16;
  double num = -2 * (s.x1_lb + s.x2_lb) * ql * ql -
               16 * (s.x1_lb + s.x2_lb) * s.x1_lb * s.x2_lb * af * a +
               8 * (af + d) * (af + d) * (s.x1_ub * s.x2_ub * s.x2_ub + 4 * std::pow(s.x1_ub, 3)) +
               8 * (a + d) * (a + d) * (s.x2_ub * s.x1_ub * s.x1_ub + 4 * std::pow(s.x2_ub, 3)) -
               24 * af * af * s.x1_lb * s.x1_lb * s.x2_lb - 24 * a * a * s.x2_lb * s.x2_lb * s.x1_lb;
  return num / den;
}

inline SodCertificate certify_sod_cell(double alpha, double alpha_f, double delta,
                                       double eps = 1e-8) {
  SodCertificate c;
  c.alpha = alpha;
  c.alpha_f = alpha_f;
  c.delta = delta;
  c.eps = eps;
  c.convex_lb = c.concave_ub = std::nan("");
  if (!cell_in_regime(alpha, alpha_f, delta) || !(eps > 0)) return c;
  c.in_regime = true;
  auto s = solution_bounds(alpha, alpha_f, delta, eps);
  c.convex_lb = convex_lower_bound(alpha, alpha_f, delta, s) - kCertSlack;
  c.concave_ub = concave_upper_bound(alpha, alpha_f, delta, s) + kCertSlack;
  c.convex_verified = c.convex_lb > 0;
  c.concave_verified = c.concave_ub < 0;
  return c;
}

// Region where convexity along (1,-1) and concavity along (0,1) are claimed at (1/2,1/2).
inline bool sod_region_contains(double alpha, double alpha_f) {
  return alpha > 1e-4 && alpha < 0.64 * alpha_f - 0.03 && 0.62 * alpha_f + alpha < 1.68;
}

// whole cell [a, a+d) x [af, af+d) inside the region; the constraints are monotone so the
// corners (a, af) and (a+d, af) plus (a+d, af+d) decide it
inline bool sod_cell_interior(double alpha, double alpha_f, double delta) {
  return sod_region_contains(alpha, alpha_f) && alpha + delta < 0.64 * alpha_f - 0.03 &&
         0.62 * (alpha_f + delta) + alpha + delta < 1.68;
}

struct SodRegionSummary {
  std::vector<SodCertificate> cells;
  int interior = 0, both_verified = 0, convex_only = 0, concave_only = 0, neither = 0;
};

inline const char* sod_csv_header() {
  return "alpha,alpha_f,delta,eps,convex_lb,concave_ub,convex_verified,concave_verified";
}

inline SodRegionSummary certify_sod_region(double delta, double eps, int threads = 0) {
  if (!(delta > 0 && delta < 0.5)) throw InvalidParams("delta must lie in (0, 0.5)");
  auto as = delta_anchors(delta, 1.68, delta);
  auto fs = delta_anchors(delta, 1.68 / 0.62, delta);
  std::vector<std::pair<double, double>> anchors;
  for (double a : as)
    for (double af : fs)
      if (sod_cell_interior(a, af, delta)) anchors.emplace_back(a, af);
  SodRegionSummary r;
  r.cells.resize(anchors.size());
  parallel_for(anchors.size(), threads, [&](std::size_t i) {
    r.cells[i] = certify_sod_cell(anchors[i].first, anchors[i].second, delta, eps);
  });
  r.interior = static_cast<int>(r.cells.size());
  for (const auto& c : r.cells) {
    if (c.convex_verified && c.concave_verified)
      ++r.both_verified;
    else if (c.convex_verified)
      ++r.convex_only;
    else if (c.concave_verified)
      ++r.concave_only;
    else
      ++r.neither;
  }
  return r;
}

inline std::string sod_certificates_to_csv(const std::vector<SodCertificate>& cells) {
  std::string s = std::string(sod_csv_header()) + "\n";
  for (const auto& c : cells)
    s += fmt_num(c.alpha) + "," + fmt_num(c.alpha_f) + "," + fmt_num(c.delta) + "," +
         fmt_num(c.eps) + "," + fmt_num(c.convex_lb) + "," + fmt_num(c.concave_ub) + "," +
         (c.convex_verified ? "true" : "false") + "," + (c.concave_verified ? "true" : "false") +
         "\n";
  return s;
}

// Cell lower bound on f1'(x) over [alpha_f, alpha_f+d1) x [alpha, alpha+d1) x [x1, x1+d2).
inline double f1_derivative_lower_bound(double alpha, double alpha_f, double x1, double d1,
                                        double d2) {
  const double lam = alpha_f + alpha, L = lam + 2 * d1;
  double t1 = std::exp(-0.5 * lam * x1 + 2 * (alpha_f + d1) * (alpha + d1) * (x1 + d2) / lam +
                       2 * alpha * std::log(x1 + d2) / L) *
              (-0.5 * L);
  double t3 = 2 * (alpha_f + 1 / (x1 + d2)) / L;
  if (x1 <= 0) return t1 + t3;
  double t2 = std::exp(-0.5 * L * (x1 + d2) + 2 * alpha_f * alpha * x1 / L +
                       2 * (alpha + d1) * std::log(x1) / lam) *
              (2 * alpha * (alpha_f + 1 / (x1 + d2)) / L);
  return t1 + t2 + t3;
}

inline bool verify_f1_monotonicity_cell(double alpha, double alpha_f, double x1, double delta1,
                                        double delta2) {
  return f1_derivative_lower_bound(alpha, alpha_f, x1, delta1, delta2) > 1.0;
}

struct F1Sweep {
  long cells = 0, verified = 0;
  std::vector<std::array<double, 3>> failures;  // (alpha, alpha_f, x1)
};

// anchors alpha, alpha_f in {1e-4, d1, 2 d1, ...} with alpha < alpha_f, alpha + alpha_f < e;
// x1 in {0, d2, ..., 1}
inline F1Sweep f1_monotonicity_sweep(double d1, double d2, int threads = 0) {
  std::vector<double> grid{1e-4};
  for (double v : delta_anchors(d1, std::exp(1.0), d1)) grid.push_back(v);
  std::vector<double> xs = delta_anchors(0, 1, d2);
  std::vector<std::pair<double, double>> pts;
  for (double a : grid)
    for (double af : grid)
      if (a < af && a + af < std::exp(1.0)) pts.push_back({a, af});
  std::vector<std::vector<std::array<double, 3>>> fails(pts.size());
  parallel_for(pts.size(), threads, [&](std::size_t i) {
    for (double x : xs)
      if (!verify_f1_monotonicity_cell(pts[i].first, pts[i].second, x, d1, d2))
        fails[i].push_back({pts[i].first, pts[i].second, x});
  });
  F1Sweep r;
  r.cells = static_cast<long>(pts.size() * xs.size());
  for (auto& f : fails) r.failures.insert(r.failures.end(), f.begin(), f.end());
  r.verified = r.cells - static_cast<long>(r.failures.size());
  return r;
}

// ---- coupling inequality ----

using MatcherFn = std::function<int(const BipartiteGraph&)>;

inline int default_matcher(const BipartiteGraph& g) { return max_matching_size(g); }

// Directed slots: kind 0 = X1 (l_i -> r_j), 1 = X2 (r_j -> l_i), 2 = X3 (r_j -> l_{m+i}),
// 3 = X4 (l_i -> r_{m+j}), each for i, j < m.
struct CouplingSample {
  int n = 0;
  std::vector<std::array<int, 3>> slots;  // (kind, i, j)
};

struct CouplingGraphs {
  BipartiteGraph A, B, C, D;
};

inline CouplingGraphs coupling_graphs(const CouplingSample& s) {
  const int n = s.n, m = n / 2;
  std::array<std::vector<std::pair<int, int>>, 4> e;  // edges (left, right) of A..D
  auto flip = [n](int v) { return n - 1 - v; };
  for (auto [kind, i, j] : s.slots) {
    switch (kind) {
      case 0:  // X1 in A, B; flipped copy in C, D
        e[0].push_back({i, j});
        e[1].push_back({i, j});
        e[2].push_back({flip(i), flip(j)});
        e[3].push_back({flip(i), flip(j)});
        break;
      case 1:
        for (auto& v : e) v.push_back({i, j});
        break;
      case 2: {  // r_j -> l_{m+i}
        int li = m + i, rj = j;
        e[0].push_back({li, rj});
        e[2].push_back({li, rj});
        e[1].push_back({flip(li), flip(rj)});
        e[3].push_back({flip(li), flip(rj)});
        break;
      }
      case 3: {  // l_i -> r_{m+j}
        int li = i, rj = m + j;
        e[0].push_back({li, rj});
        e[2].push_back({li, rj});
        e[1].push_back({flip(li), flip(rj)});
        e[3].push_back({flip(li), flip(rj)});
        break;
      }
    }
  }
  CouplingGraphs g;
  g.A = from_edges(n, n, e[0]);
  g.B = from_edges(n, n, e[1]);
  g.C = from_edges(n, n, e[2]);
  g.D = from_edges(n, n, e[3]);
  return g;
}

inline CouplingSample sample_coupling(int n, double alpha_f, RngSeed seed) {
  const int m = n / 2;
  const std::uint64_t total = 4ull * m * m;
  CouplingSample s;
  s.n = n;
  Stream rng(seed);
  double lq = detail::log1m(alpha_f / n);
  std::uint64_t pos = rng.geometric_skip(lq);
  while (pos < total) {
    int kind = static_cast<int>(pos / (1ull * m * m));
    int rest = static_cast<int>(pos % (1ull * m * m));
    s.slots.push_back({kind, rest / m, rest % m});
    std::uint64_t skip = rng.geometric_skip(lq);
    if (skip >= total) break;
    pos += 1 + skip;
  }
  return s;
}

struct CouplingReport {
  int n = 0;
  double alpha_f = 0;
  int replicates = 0;
  long violations = 0;
  long max_violation = 0;  // max of (M_A+M_B) - (M_C+M_D) over replicates, floored at 0
  double mean_gap = 0;     // mean of (M_C+M_D-M_A-M_B)/(2n)
  double gap_se = 0;
  double gap_bound = 0;    // half the asymptotic constant, the finite-n reference
  std::uint64_t seed = 0;
  nlohmann::json to_json() const {
    return {{"n", n}, {"alpha_f", alpha_f}, {"replicates", replicates},
            {"violations", violations}, {"max_violation", max_violation},
            {"mean_gap", mean_gap}, {"gap_se", gap_se}, {"gap_bound", gap_bound},
            {"seed", seed}};
  }
};

inline long coupling_gap(const CouplingSample& s, const MatcherFn& match) {
  auto g = coupling_graphs(s);
  return static_cast<long>(match(g.C)) + match(g.D) - match(g.A) - match(g.B);
}

inline CouplingReport coupling_inequality_check(int n, double alpha_f, std::uint64_t seed,
                                                int replicates, const MatcherFn& match = default_matcher,
                                                int threads = 0) {
  if (n < 2 || n % 2) throw InvalidParams("coupling check needs an even n >= 2");
  if (!(alpha_f > 0 && alpha_f <= n)) throw InvalidParams("coupling check needs 0 < alpha_f <= n");
  if (replicates < 1) throw InvalidParams("replicates must be >= 1");
  std::vector<long> gaps(replicates);
  parallel_for(replicates, threads, [&](std::size_t r) {
    gaps[r] = coupling_gap(sample_coupling(n, alpha_f, RngSeed{seed, r}), match);
  });
  CouplingReport rep;
  rep.n = n;
  rep.alpha_f = alpha_f;
  rep.replicates = replicates;
  rep.seed = seed;
  std::vector<double> per(replicates);
  for (int r = 0; r < replicates; ++r) {
    if (gaps[r] < 0) {
      ++rep.violations;
      rep.max_violation = std::max(rep.max_violation, -gaps[r]);
    }
    per[r] = gaps[r] / (2.0 * n);
  }
  auto e = summarize(per, Metric::mu);
  rep.mean_gap = e.mean;
  rep.gap_se = e.std_err;
  rep.gap_bound = 0.5 * cannibalization_gap_bound(alpha_f);
  return rep;
}

struct ExhaustiveCoupling {
  long cases = 0, violations = 0;
};

// every configuration with at most max_edges occupied slots
inline ExhaustiveCoupling coupling_exhaustive(int n, int max_edges,
                                              const MatcherFn& match = default_matcher) {
  if (n < 2 || n % 2) throw InvalidParams("coupling check needs an even n >= 2");
  const int m = n / 2, total = 4 * m * m;
  ExhaustiveCoupling out;
  std::vector<int> pick;
  std::function<void(int)> rec = [&](int start) {
    CouplingSample s;
    s.n = n;
    for (int p : pick) s.slots.push_back({p / (m * m), (p % (m * m)) / m, p % m});
    ++out.cases;
    if (coupling_gap(s, match) < 0) ++out.violations;
    if (static_cast<int>(pick.size()) == max_edges) return;
    for (int p = start; p < total; ++p) {
      pick.push_back(p);
      rec(p + 1);
      pick.pop_back();
    }
  };
  rec(0);
  return out;
}

}  // namespace flexmatch
