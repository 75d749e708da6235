#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "graph.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace flexmatch {

namespace detail {

inline void require_intensities(const ModelParams& p) {
  if (!(p.alpha >= 0.0)) throw InvalidParams("alpha must be nonnegative");
  if (!(p.alpha_f > p.alpha)) throw InvalidParams("alpha_f must exceed alpha");
  if (p.n < 1) throw InvalidParams("n must be positive");
}

inline void draw_flags(std::vector<std::uint8_t>& flags, int count, double prob, Stream& rng) {
  flags.resize(count);
  for (int i = 0; i < count; ++i) flags[i] = rng.bernoulli(prob) ? 1 : 0;
}

// additive edge law 2p + (F_l + F_r)(p^f - p)
struct EdgeLaw {
  std::array<double, 3> q;  // indexed by number of flexible endpoints
  EdgeLaw(double p, double pf) : q{2 * p, p + pf, 2 * pf} {}
  double operator()(int fl, int fr) const { return q[fl + fr]; }
};

inline double log1m(double q) {
  return q >= 1.0 ? -std::numeric_limits<double>::infinity() : std::log1p(-q);
}

// Geometric-skip sampling stratified by right-node type. With want_weights, an accepted pair
// gets w ~ U(1-q, 1), the law of a U(0,1) utility conditioned on exceeding 1-q.
inline void sample_stratified(BipartiteGraph& g, const EdgeLaw& law, Stream& rng,
                              bool want_weights) {
  std::array<std::vector<int>, 2> strata;
  for (int j = 0; j < g.n_right; ++j) strata[g.flex_right[j]].push_back(j);
  std::array<std::array<double, 2>, 2> lq{};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) lq[a][b] = log1m(law(a, b));

  g.offsets.assign(1, 0);
  g.targets.clear();
  if (want_weights) g.weights.emplace();
  std::array<std::vector<std::pair<int, double>>, 2> found;
  for (int i = 0; i < g.n_left; ++i) {
    int fl = g.flex_left[i];
    for (int s = 0; s < 2; ++s) {
      found[s].clear();
      double q = law(fl, s);
      if (q <= 0.0) continue;
      const auto& list = strata[s];
      std::uint64_t pos = rng.geometric_skip(lq[fl][s]);
      while (pos < list.size()) {
        double w = want_weights ? 1.0 - q * rng.uniform() : 0.0;
        found[s].push_back({list[pos], w});
        std::uint64_t skip = rng.geometric_skip(lq[fl][s]);
        if (skip >= list.size()) break;
        pos += 1 + skip;
      }
    }
    std::size_t a = 0, b = 0;
    while (a < found[0].size() || b < found[1].size()) {
      bool take0 = b >= found[1].size() ||
                   (a < found[0].size() && found[0][a].first < found[1][b].first);
      const auto& e = take0 ? found[0][a++] : found[1][b++];
      g.targets.push_back(e.first);
      if (want_weights) g.weights->push_back(e.second - 0.8);
    }
    g.offsets.push_back(static_cast<int>(g.targets.size()));
  }
}

// O(n_left * n_right) Bernoulli reference with identical marginal law
inline void sample_dense(BipartiteGraph& g, const EdgeLaw& law, Stream& rng, bool want_weights) {
  g.offsets.assign(1, 0);
  g.targets.clear();
  if (want_weights) g.weights.emplace();
  for (int i = 0; i < g.n_left; ++i) {
    for (int j = 0; j < g.n_right; ++j) {
      double q = law(g.flex_left[i], g.flex_right[j]);
      if (want_weights) {
        double w = rng.uniform();
        if (w > 1.0 - q) {
          g.targets.push_back(j);
          g.weights->push_back(w - 0.8);
        }
      } else if (rng.bernoulli(q)) {
        g.targets.push_back(j);
      }
    }
    g.offsets.push_back(static_cast<int>(g.targets.size()));
  }
}

inline BipartiteGraph base_like(int n_left, int n_right, double prob_l, double prob_r,
                                const EdgeLaw& law, RngSeed seed, bool weights, bool dense) {
  BipartiteGraph g;
  g.n_left = n_left;
  g.n_right = n_right;
  Stream rng(seed);
  draw_flags(g.flex_left, n_left, prob_l, rng);
  draw_flags(g.flex_right, n_right, prob_r, rng);
  if (dense)
    sample_dense(g, law, rng, weights);
  else
    sample_stratified(g, law, rng, weights);
  return g;
}

inline void require_base(const ModelParams& p) {
  require_intensities(p);
  if (2.0 * p.alpha_f / p.n > 1.0)
    throw ProbabilityOverflow("edge probability 2*alpha_f/n exceeds 1");
}

}  // namespace detail

inline BipartiteGraph sample_base_graph(const ModelParams& p, const FlexAllocation& a,
                                        RngSeed seed, bool dense_reference = false) {
  detail::require_base(p);
  check_alloc(a);
  detail::EdgeLaw law(p.alpha / p.n, p.alpha_f / p.n);
  return detail::base_like(p.n, p.n, a.b_l, a.b_r, law, seed, false, dense_reference);
}

inline BipartiteGraph sample_imbalanced_graph(const ModelParams& p, const FlexAllocation& a,
                                              RngSeed seed, bool dense_reference = false) {
  detail::require_base(p);
  check_alloc(a);
  if (!(p.lambda > 0.0 && p.lambda <= 1.0)) throw InvalidParams("lambda must lie in (0,1]");
  int nr = right_side_size(p);
  if (nr < 1) throw InvalidParams("round(lambda*n) must be at least 1");
  if (a.b_l * p.lambda > 1.0) throw InvalidParams("b_l*lambda exceeds 1");
  detail::EdgeLaw law(p.alpha / p.n, p.alpha_f / p.n);
  return detail::base_like(p.n, nr, a.b_l * p.lambda, a.b_r, law, seed, false, dense_reference);
}

inline BipartiteGraph sample_weighted_graph(const ModelParams& p, const FlexAllocation& a,
                                            RngSeed seed, bool dense_reference = false) {
  detail::require_base(p);
  check_alloc(a);
  detail::EdgeLaw law(p.alpha / p.n, p.alpha_f / p.n);
  return detail::base_like(p.n, p.n, a.b_l, a.b_r, law, seed, true, dense_reference);
}

inline bool local_eligible(int i, int j, int n, int k) {
  int d = ((j - i) % n + n) % n;
  return d <= k - 1;
}

inline BipartiteGraph sample_local_graph(const ModelParams& p, const FlexAllocation& a,
                                         RngSeed seed) {
  if (p.n < 1) throw InvalidParams("n must be positive");
  if (p.k < 1) throw InvalidParams("k must be positive");
  double pk = p.alpha / p.k, pfk = p.alpha_f / p.k;
  if (!(pk >= 0.0 && pk < pfk)) throw InvalidParams("local model needs 0 <= alpha < alpha_f");
  if (pfk > 0.5) throw InvalidParams("local model needs alpha_f/k <= 1/2");
  check_alloc(a);
  detail::EdgeLaw law(pk, pfk);
  BipartiteGraph g;
  g.n_left = g.n_right = p.n;
  Stream rng(seed);
  detail::draw_flags(g.flex_left, p.n, a.b_l, rng);
  detail::draw_flags(g.flex_right, p.n, a.b_r, rng);
  int width = std::min(p.k, p.n);
  std::vector<int> row;
  for (int i = 0; i < p.n; ++i) {
    row.clear();
    for (int d = 0; d < width; ++d) {
      int j = (i + d) % p.n;
      if (rng.bernoulli(law(g.flex_left[i], g.flex_right[j]))) row.push_back(j);
    }
    std::sort(row.begin(), row.end());
    g.targets.insert(g.targets.end(), row.begin(), row.end());
    g.offsets.push_back(static_cast<int>(g.targets.size()));
  }
  return g;
}

inline double spatial_threshold(const ModelParams& p, int fl, int fr) {
  double s = std::sqrt(static_cast<double>(p.n));
  double pn = p.alpha / s, pf = p.alpha_f / s;
  return 2 * pn + (fl + fr) * (pf - pn);
}

inline BipartiteGraph sample_spatial_graph(const ModelParams& p, const FlexAllocation& a,
                                           RngSeed seed) {
  detail::require_intensities(p);
  check_alloc(a);
  double s = std::sqrt(static_cast<double>(p.n));
  if (2.0 * p.alpha_f / s > std::sqrt(2.0))
    throw InvalidParams("spatial radius 2*alpha_f/sqrt(n) exceeds the unit-square diagonal");
  BipartiteGraph g;
  g.n_left = g.n_right = p.n;
  Stream rng(seed);
  detail::draw_flags(g.flex_left, p.n, a.b_l, rng);
  detail::draw_flags(g.flex_right, p.n, a.b_r, rng);
  g.pos_left.emplace(p.n);
  g.pos_right.emplace(p.n);
  for (auto& q : *g.pos_left) q = {rng.uniform(), rng.uniform()};
  for (auto& q : *g.pos_right) q = {rng.uniform(), rng.uniform()};

  double rmax = 2.0 * p.alpha_f / s;
  int cells = std::max(1, std::min(1024, static_cast<int>(1.0 / std::max(rmax, 1e-9))));
  auto cell_of = [&](double v) { return std::min(cells - 1, static_cast<int>(v * cells)); };
  std::vector<std::vector<int>> bucket(static_cast<std::size_t>(cells) * cells);
  for (int j = 0; j < p.n; ++j) {
    const auto& q = (*g.pos_right)[j];
    bucket[cell_of(q[0]) * cells + cell_of(q[1])].push_back(j);
  }
  std::vector<int> row;
  for (int i = 0; i < p.n; ++i) {
    row.clear();
    const auto& d = (*g.pos_left)[i];
    int cx = cell_of(d[0]), cy = cell_of(d[1]);
    for (int x = std::max(0, cx - 1); x <= std::min(cells - 1, cx + 1); ++x)
      for (int y = std::max(0, cy - 1); y <= std::min(cells - 1, cy + 1); ++y)
        for (int j : bucket[x * cells + y]) {
          const auto& r = (*g.pos_right)[j];
          double dist = std::hypot(d[0] - r[0], d[1] - r[1]);
          if (dist <= spatial_threshold(p, g.flex_left[i], g.flex_right[j])) row.push_back(j);
        }
    std::sort(row.begin(), row.end());
    g.targets.insert(g.targets.end(), row.begin(), row.end());
    g.offsets.push_back(static_cast<int>(g.targets.size()));
  }
  return g;
}

inline BipartiteGraph sample_graph(Variant v, const ModelParams& p, const FlexAllocation& a,
                                   RngSeed seed) {
  switch (v) {
    case Variant::base: return sample_base_graph(p, a, seed);
    case Variant::local: return sample_local_graph(p, a, seed);
    case Variant::spatial: return sample_spatial_graph(p, a, seed);
    case Variant::imbalanced: return sample_imbalanced_graph(p, a, seed);
    case Variant::weighted: return sample_weighted_graph(p, a, seed);
  }
  throw InvalidParams("unknown variant");
}

}  // namespace flexmatch
