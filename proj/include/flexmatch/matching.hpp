#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "graph.hpp"
#include "rng.hpp"

namespace flexmatch {

struct Matching {
  std::vector<std::pair<int, int>> pairs;
  std::optional<double> weight_total;
  int size() const { return static_cast<int>(pairs.size()); }
};

struct MissingWeights : InvalidParams {
  using InvalidParams::InvalidParams;
};

// Hopcroft-Karp: BFS layers from free left nodes, then DFS along the layering.
class HopcroftKarp {
 public:
  explicit HopcroftKarp(const BipartiteGraph& g)
      : g_(g), ml_(g.n_left, -1), mr_(g.n_right, -1), dist_(g.n_left), it_(g.n_left) {}

  int run() {
    int size = 0;
    // cheap greedy seed
    for (int i = 0; i < g_.n_left; ++i)
      for (int j : g_.neighbors(i))
        if (mr_[j] < 0) {
          ml_[i] = j;
          mr_[j] = i;
          ++size;
          break;
        }
    while (bfs()) {
      for (int i = 0; i < g_.n_left; ++i) it_[i] = g_.offsets[i];
      for (int i = 0; i < g_.n_left; ++i)
        if (ml_[i] < 0 && dfs(i)) ++size;
    }
    return size;
  }

  Matching matching() const {
    Matching m;
    for (int i = 0; i < g_.n_left; ++i)
      if (ml_[i] >= 0) m.pairs.push_back({i, ml_[i]});
    return m;
  }

 private:
  static constexpr int kInf = std::numeric_limits<int>::max();

  bool bfs() {
    queue_.clear();
    for (int i = 0; i < g_.n_left; ++i) {
      if (ml_[i] < 0) {
        dist_[i] = 0;
        queue_.push_back(i);
      } else {
        dist_[i] = kInf;
      }
    }
    bool found = false;
    for (std::size_t h = 0; h < queue_.size(); ++h) {
      int i = queue_[h];
      for (int j : g_.neighbors(i)) {
        int k = mr_[j];
        if (k < 0) {
          found = true;
        } else if (dist_[k] == kInf) {
          dist_[k] = dist_[i] + 1;
          queue_.push_back(k);
        }
      }
    }
    return found;
  }

  bool dfs(int i) {
    for (int& e = it_[i]; e < g_.offsets[i + 1]; ++e) {
      int j = g_.targets[e];
      int k = mr_[j];
      if (k < 0 || (dist_[k] == dist_[i] + 1 && dfs(k))) {
        ml_[i] = j;
        mr_[j] = i;
        ++e;
        return true;
      }
    }
    dist_[i] = kInf;
    return false;
  }

  const BipartiteGraph& g_;
  std::vector<int> ml_, mr_, dist_, it_, queue_;
};

inline Matching max_matching(const BipartiteGraph& g) {
  HopcroftKarp hk(g);
  hk.run();
  return hk.matching();
}

inline int max_matching_size(const BipartiteGraph& g) {
  HopcroftKarp hk(g);
  return hk.run();
}

// Successive shortest augmenting paths with node potentials (Kuhn-Munkres form) on the square
// completion; only positive-weight edges carry cost, everything else is a free "unmatched" slot.
inline Matching max_weight_matching(const BipartiteGraph& g) {
  if (!g.weights) throw MissingWeights("max_weight_matching needs a weighted graph");
  const int n = std::max(g.n_left, g.n_right);
  Matching out;
  out.weight_total = 0.0;
  if (n == 0) return out;
  std::vector<double> cost(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < g.n_left; ++i) {
    auto nb = g.neighbors(i);
    auto ws = g.neighbor_weights(i);
    for (std::size_t t = 0; t < nb.size(); ++t)
      if (ws[t] > 0.0) cost[static_cast<std::size_t>(i) * n + nb[t]] = -ws[t];
  }
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  for (int j = 1; j <= n; ++j) {
    int i = p[j] - 1, r = j - 1;
    if (i >= g.n_left || r >= g.n_right) continue;
    double c = cost[static_cast<std::size_t>(i) * n + r];
    if (c < 0.0) {
      out.pairs.push_back({i, r});
      *out.weight_total += -c;
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  return out;
}

// Karp-Sipser: prefer a uniformly random edge touching a degree-1 node, else any edge.
inline Matching karp_sipser(const BipartiteGraph& g, RngSeed seed) {
  Stream rng(seed);
  const int nl = g.n_left, nr = g.n_right;
  const int m = static_cast<int>(g.edge_count());
  std::vector<int> eu(m), ev(m);
  for (int i = 0; i < nl; ++i)
    for (int e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
      eu[e] = i;
      ev[e] = g.targets[e];
    }
  // node ids: left i -> i, right j -> nl + j
  std::vector<int> deg(nl + nr, 0), inc_off(nl + nr + 1, 0), inc(2 * m);
  for (int e = 0; e < m; ++e) {
    ++inc_off[eu[e] + 1];
    ++inc_off[nl + ev[e] + 1];
  }
  for (int x = 0; x < nl + nr; ++x) inc_off[x + 1] += inc_off[x];
  {
    std::vector<int> fill(inc_off.begin(), inc_off.end() - 1);
    for (int e = 0; e < m; ++e) {
      inc[fill[eu[e]]++] = e;
      inc[fill[nl + ev[e]]++] = e;
    }
  }
  for (int x = 0; x < nl + nr; ++x) deg[x] = inc_off[x + 1] - inc_off[x];

  // indexed sets with swap-remove
  std::vector<int> alive(m), alive_pos(m), pend, pend_pos(m, -1);
  for (int e = 0; e < m; ++e) alive[e] = alive_pos[e] = e;
  std::vector<char> dead(m, 0), matched(nl + nr, 0);

  auto pend_add = [&](int e) {
    if (pend_pos[e] >= 0) return;
    pend_pos[e] = static_cast<int>(pend.size());
    pend.push_back(e);
  };
  auto remove_from = [](std::vector<int>& set, std::vector<int>& pos, int e) {
    int at = pos[e];
    if (at < 0) return;
    int last = set.back();
    set[at] = last;
    pos[last] = at;
    set.pop_back();
    pos[e] = -1;
  };
  auto unique_alive_edge = [&](int x) {
    for (int t = inc_off[x]; t < inc_off[x + 1]; ++t)
      if (!dead[inc[t]]) return inc[t];
    return -1;
  };
  auto kill = [&](int e) {
    dead[e] = 1;
    remove_from(alive, alive_pos, e);
    remove_from(pend, pend_pos, e);
    for (int x : {eu[e], nl + ev[e]}) {
      if (--deg[x] == 1 && !matched[x]) {
        int f = unique_alive_edge(x);
        if (f >= 0) pend_add(f);
      }
    }
  };
  for (int x = 0; x < nl + nr; ++x)
    if (deg[x] == 1) pend_add(inc[inc_off[x]]);

  Matching out;
  while (!alive.empty()) {
    int e = pend.empty() ? alive[rng.below(alive.size())] : pend[rng.below(pend.size())];
    int a = eu[e], b = nl + ev[e];
    out.pairs.push_back({eu[e], ev[e]});
    matched[a] = matched[b] = 1;
    for (int x : {a, b})
      for (int t = inc_off[x]; t < inc_off[x + 1]; ++t)
        if (!dead[inc[t]]) kill(inc[t]);
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  return out;
}

namespace detail {

template <bool Prioritize>
Matching greedy(const BipartiteGraph& g, RngSeed seed) {
  Stream rng(seed);
  std::vector<char> taken(g.n_right, 0);
  std::vector<int> regular, flexible;
  Matching out;
  for (int i = 0; i < g.n_left; ++i) {
    regular.clear();
    flexible.clear();
    for (int j : g.neighbors(i)) {
      if (taken[j]) continue;
      if (Prioritize && g.flex_right[j])
        flexible.push_back(j);
      else
        regular.push_back(j);
    }
    const auto& tier = regular.empty() ? flexible : regular;
    if (tier.empty()) continue;
    int j = tier[rng.below(tier.size())];
    taken[j] = 1;
    out.pairs.push_back({i, j});
  }
  return out;
}

}  // namespace detail

inline Matching greedy_naive(const BipartiteGraph& g, RngSeed seed) {
  return detail::greedy<false>(g, seed);
}

inline Matching greedy_prioritizing(const BipartiteGraph& g, RngSeed seed) {
  return detail::greedy<true>(g, seed);
}

inline int non_isolated_left(const BipartiteGraph& g) {
  int c = 0;
  for (int i = 0; i < g.n_left; ++i) c += g.degree(i) > 0;
  return c;
}

inline int non_isolated_right(const BipartiteGraph& g) {
  std::vector<char> seen(g.n_right, 0);
  for (int j : g.targets) seen[j] = 1;
  int c = 0;
  for (char s : seen) c += s;
  return c;
}

inline int non_isolated_min(const BipartiteGraph& g) {
  return std::min(non_isolated_left(g), non_isolated_right(g));
}

inline bool is_valid_matching(const BipartiteGraph& g, const Matching& m) {
  std::vector<char> ul(g.n_left, 0), ur(g.n_right, 0);
  for (auto [i, j] : m.pairs) {
    if (i < 0 || i >= g.n_left || j < 0 || j >= g.n_right) return false;
    if (ul[i] || ur[j]) return false;
    if (!g.has_edge(i, j)) return false;
    ul[i] = ur[j] = 1;
  }
  return true;
}

struct MatchStats {
  int max_match_size = 0;
  int non_isolated_left = 0;
  int non_isolated_right = 0;
  int phi_count = 0;
  std::optional<int> greedy_naive_size;
  std::optional<int> greedy_prior_size;
  std::optional<int> ks_size;
  std::optional<double> weight_total;
};

inline MatchStats match_stats(const BipartiteGraph& g, RngSeed seed, bool with_heuristics = true) {
  MatchStats s;
  s.max_match_size = max_matching_size(g);
  s.non_isolated_left = non_isolated_left(g);
  s.non_isolated_right = non_isolated_right(g);
  s.phi_count = std::min(s.non_isolated_left, s.non_isolated_right);
  if (with_heuristics) {
    s.greedy_naive_size = greedy_naive(g, seed.lane(2)).size();
    s.greedy_prior_size = greedy_prioritizing(g, seed.lane(3)).size();
    s.ks_size = karp_sipser(g, seed.lane(1)).size();
  }
  if (g.weights) s.weight_total = *max_weight_matching(g).weight_total;
  return s;
}

}  // namespace flexmatch
