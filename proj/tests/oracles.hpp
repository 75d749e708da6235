#pragma once

// Independent reference computations used by the tests. Nothing here calls the library's
// solvers; they only read graph structure.

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "flexmatch/graph.hpp"

namespace oracle {

using flexmatch::BipartiteGraph;

// exhaustive search: each left node either stays unmatched or takes a free neighbor
inline void enumerate(const BipartiteGraph& g, int i, std::vector<char>& used, int size,
                      double w, int& best_size, double& best_w) {
  if (i == g.n_left) {
    best_size = std::max(best_size, size);
    best_w = std::max(best_w, w);
    return;
  }
  enumerate(g, i + 1, used, size, w, best_size, best_w);
  auto nb = g.neighbors(i);
  for (std::size_t t = 0; t < nb.size(); ++t) {
    int j = nb[t];
    if (used[j]) continue;
    used[j] = 1;
    double ew = g.weights ? (*g.weights)[g.offsets[i] + t] : 0.0;
    enumerate(g, i + 1, used, size + 1, w + ew, best_size, best_w);
    used[j] = 0;
  }
}

inline int max_matching_size(const BipartiteGraph& g) {
  std::vector<char> used(g.n_right, 0);
  int bs = 0;
  double bw = 0;
  enumerate(g, 0, used, 0, 0.0, bs, bw);
  return bs;
}

inline double max_weight(const BipartiteGraph& g) {
  std::vector<char> used(g.n_right, 0);
  int bs = 0;
  double bw = 0;
  enumerate(g, 0, used, 0, 0.0, bs, bw);
  return bw;
}

inline BipartiteGraph random_graph(std::mt19937_64& rng, int max_side, bool weighted) {
  std::uniform_int_distribution<int> side(1, max_side);
  int nl = side(rng), nr = side(rng);
  double dens = std::uniform_real_distribution<double>(0.05, 0.7)(rng);
  std::bernoulli_distribution coin(dens);
  std::uniform_real_distribution<double> wd(-0.5, 1.0);
  std::vector<std::pair<int, int>> e;
  std::vector<double> w;
  for (int i = 0; i < nl; ++i)
    for (int j = 0; j < nr; ++j)
      if (coin(rng)) {
        e.emplace_back(i, j);
        w.push_back(wd(rng));
      }
  return flexmatch::from_edges(nl, nr, e, weighted ? &w : nullptr);
}

// random forest: each new node attaches to at most one earlier node on the other side
inline BipartiteGraph random_forest(std::mt19937_64& rng, int n) {
  std::vector<std::pair<int, int>> e;
  std::bernoulli_distribution attach(0.8);
  int nl = 0, nr = 0;
  for (int t = 0; t < 2 * n; ++t) {
    bool left = t % 2 == 0;
    if (left) {
      if (nr > 0 && attach(rng)) e.emplace_back(nl, std::uniform_int_distribution<int>(0, nr - 1)(rng));
      ++nl;
    } else {
      if (nl > 0 && attach(rng)) e.emplace_back(std::uniform_int_distribution<int>(0, nl - 1)(rng), nr);
      ++nr;
    }
  }
  return flexmatch::from_edges(nl, nr, e);
}

// phi from its definition: isolation probabilities of a left node of each type
inline double phi_from_definition(double a, double af, double bl, double br) {
  const double pff = 2 * af, pfr = a + af, prr = 2 * a;
  auto iso_left = [&](bool flex) {
    double rate = flex ? br * pff + (1 - br) * pfr : br * pfr + (1 - br) * prr;
    return std::exp(-rate);
  };
  auto iso_right = [&](bool flex) {
    double rate = flex ? bl * pff + (1 - bl) * pfr : bl * pfr + (1 - bl) * prr;
    return std::exp(-rate);
  };
  double l = 1 - (bl * iso_left(true) + (1 - bl) * iso_left(false));
  double r = 1 - (br * iso_right(true) + (1 - br) * iso_right(false));
  return std::min(l, r);
}

// one-sided matched fraction by direct fixed-point iteration of x = exp(-lam x)
inline double one_sided_ks_oracle(double lam) {
  double x = 0;
  for (int i = 0; i < 100000; ++i) {
    double nx = std::exp(-lam * x);
    if (std::fabs(nx - x) < 1e-15) break;
    x = 0.5 * (x + nx);
  }
  return 2 - x - std::exp(-lam * x) * (1 + lam * x);
}

}  // namespace oracle
