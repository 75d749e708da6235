#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "types.hpp"

namespace flexmatch {

// Adjacency is stored CSR-style: left node i owns targets[offsets[i] .. offsets[i+1]).
struct BipartiteGraph {
  int n_left = 0;
  int n_right = 0;
  std::vector<std::uint8_t> flex_left;
  std::vector<std::uint8_t> flex_right;
  std::vector<int> offsets{0};
  std::vector<int> targets;
  std::optional<std::vector<double>> weights;
  std::optional<std::vector<std::array<double, 2>>> pos_left;
  std::optional<std::vector<std::array<double, 2>>> pos_right;

  std::span<const int> neighbors(int i) const {
    return {targets.data() + offsets[i], targets.data() + offsets[i + 1]};
  }
  std::span<const double> neighbor_weights(int i) const {
    return {weights->data() + offsets[i], weights->data() + offsets[i + 1]};
  }
  int degree(int i) const { return offsets[i + 1] - offsets[i]; }
  std::size_t edge_count() const { return targets.size(); }
  bool has_edge(int i, int j) const {
    auto nb = neighbors(i);
    for (int x : nb)
      if (x == j) return true;
    return false;
  }
};

// Builds a graph from an unsorted (possibly duplicated) edge list; duplicates keep the first weight.
inline BipartiteGraph from_edges(int n_left, int n_right,
                                 std::vector<std::pair<int, int>> edges,
                                 const std::vector<double>* weights = nullptr) {
  BipartiteGraph g;
  g.n_left = n_left;
  g.n_right = n_right;
  g.flex_left.assign(n_left, 0);
  g.flex_right.assign(n_right, 0);
  std::vector<std::size_t> order(edges.size());
  for (std::size_t e = 0; e < order.size(); ++e) order[e] = e;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return edges[a] < edges[b]; });
  g.offsets.assign(n_left + 1, 0);
  if (weights) g.weights.emplace();
  std::pair<int, int> last{-1, -1};
  for (std::size_t e : order) {
    auto [i, j] = edges[e];
    if (i < 0 || i >= n_left || j < 0 || j >= n_right)
      throw InvalidParams("edge endpoint out of range");
    if (edges[e] == last) continue;
    last = edges[e];
    g.targets.push_back(j);
    if (weights) g.weights->push_back((*weights)[e]);
    ++g.offsets[i + 1];
  }
  for (int i = 0; i < n_left; ++i) g.offsets[i + 1] += g.offsets[i];
  return g;
}

inline bool valid_adjacency(const BipartiteGraph& g) {
  if (static_cast<int>(g.offsets.size()) != g.n_left + 1) return false;
  for (int i = 0; i < g.n_left; ++i) {
    auto nb = g.neighbors(i);
    for (std::size_t t = 0; t < nb.size(); ++t) {
      if (nb[t] < 0 || nb[t] >= g.n_right) return false;
      if (t > 0 && nb[t - 1] >= nb[t]) return false;
    }
  }
  return true;
}

inline nlohmann::json to_json(const BipartiteGraph& g) {
  nlohmann::json j;
  j["n_left"] = g.n_left;
  j["n_right"] = g.n_right;
  j["flex_left"] = g.flex_left;
  j["flex_right"] = g.flex_right;
  auto adj = nlohmann::json::array();
  for (int i = 0; i < g.n_left; ++i) {
    auto nb = g.neighbors(i);
    adj.push_back(std::vector<int>(nb.begin(), nb.end()));
  }
  j["adjacency"] = std::move(adj);
  if (g.weights) {
    auto w = nlohmann::json::array();
    for (int i = 0; i < g.n_left; ++i) {
      auto ws = g.neighbor_weights(i);
      w.push_back(std::vector<double>(ws.begin(), ws.end()));
    }
    j["weights"] = std::move(w);
  }
  if (g.pos_left) {
    j["positions_left"] = *g.pos_left;
    j["positions_right"] = *g.pos_right;
  }
  return j;
}

inline BipartiteGraph graph_from_json(const nlohmann::json& j) {
  BipartiteGraph g;
  g.n_left = j.at("n_left").get<int>();
  g.n_right = j.at("n_right").get<int>();
  g.flex_left = j.at("flex_left").get<std::vector<std::uint8_t>>();
  g.flex_right = j.at("flex_right").get<std::vector<std::uint8_t>>();
  const auto& adj = j.at("adjacency");
  if (static_cast<int>(adj.size()) != g.n_left) throw InvalidParams("adjacency size mismatch");
  bool weighted = j.contains("weights");
  if (weighted) g.weights.emplace();
  for (int i = 0; i < g.n_left; ++i) {
    auto nb = adj[i].get<std::vector<int>>();
    g.targets.insert(g.targets.end(), nb.begin(), nb.end());
    g.offsets.push_back(static_cast<int>(g.targets.size()));
    if (weighted) {
      auto ws = j["weights"][i].get<std::vector<double>>();
      if (ws.size() != nb.size()) throw InvalidParams("weight list size mismatch");
      g.weights->insert(g.weights->end(), ws.begin(), ws.end());
    }
  }
  if (j.contains("positions_left")) {
    g.pos_left = j["positions_left"].get<std::vector<std::array<double, 2>>>();
    g.pos_right = j["positions_right"].get<std::vector<std::array<double, 2>>>();
  }
  if (!valid_adjacency(g)) throw InvalidParams("adjacency lists must be sorted and in range");
  return g;
}

}  // namespace flexmatch
