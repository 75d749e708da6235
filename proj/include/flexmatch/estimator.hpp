#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "generators.hpp"
#include "matching.hpp"
#include "parallel.hpp"

namespace flexmatch {

// `edges` is a raw per-graph count, all others are fractions of n (the left-side size).
enum class Metric { mu, phi, psi_naive, psi_prior, ks, weight, edges };

inline const char* to_string(Metric m) {
  switch (m) {
    case Metric::mu: return "mu";
    case Metric::phi: return "phi";
    case Metric::psi_naive: return "psi_naive";
    case Metric::psi_prior: return "psi_prior";
    case Metric::ks: return "ks";
    case Metric::weight: return "weight";
    case Metric::edges: return "edges";
  }
  return "?";
}

inline Metric parse_metric(const std::string& s) {
  for (Metric m : {Metric::mu, Metric::phi, Metric::psi_naive, Metric::psi_prior, Metric::ks,
                   Metric::weight, Metric::edges})
    if (s == to_string(m)) return m;
  throw InvalidParams("unknown metric: " + s);
}

struct EstimateRequest {
  Variant variant = Variant::base;
  ModelParams params;
  FlexAllocation alloc;
  int replicates = 1;
  std::vector<Metric> metrics{Metric::mu};
  std::uint64_t master_seed = 0;
  int threads = 0;
};

struct MetricEstimate {
  Metric metric = Metric::mu;
  double mean = 0.0;
  double std_err = 0.0;
  int replicates = 0;
};

struct Estimate {
  std::vector<MetricEstimate> values;
  const MetricEstimate& at(Metric m) const {
    for (const auto& v : values)
      if (v.metric == m) return v;
    throw InvalidParams(std::string("metric not estimated: ") + to_string(m));
  }
};

inline void validate(const EstimateRequest& r) {
  if (r.replicates < 1) throw InvalidParams("replicates must be >= 1");
  if (r.metrics.empty()) throw InvalidParams("at least one metric required");
  for (Metric m : r.metrics)
    if (m == Metric::weight && r.variant != Variant::weighted)
      throw InvalidParams("weight metric requires the weighted variant");
}

inline double metric_value(Metric m, const BipartiteGraph& g, RngSeed seed) {
  const double n = g.n_left;
  switch (m) {
    case Metric::mu: return max_matching_size(g) / n;
    case Metric::phi: return non_isolated_min(g) / n;
    case Metric::psi_naive: return greedy_naive(g, seed.lane(2)).size() / n;
    case Metric::psi_prior: return greedy_prioritizing(g, seed.lane(3)).size() / n;
    case Metric::ks: return karp_sipser(g, seed.lane(1)).size() / n;
    case Metric::weight: return *max_weight_matching(g).weight_total / n;
    case Metric::edges: return static_cast<double>(g.edge_count());
  }
  return 0.0;
}

// samples[r * metrics.size() + k] = metric k on replicate r
inline std::vector<double> estimate_samples(const EstimateRequest& req) {
  validate(req);
  const std::size_t nm = req.metrics.size();
  std::vector<double> out(static_cast<std::size_t>(req.replicates) * nm);
  parallel_for(req.replicates, req.threads, [&](std::size_t r) {
    RngSeed seed{req.master_seed, r};
    BipartiteGraph g = sample_graph(req.variant, req.params, req.alloc, seed);
    for (std::size_t k = 0; k < nm; ++k) out[r * nm + k] = metric_value(req.metrics[k], g, seed);
  });
  return out;
}

inline MetricEstimate summarize(const std::vector<double>& x, Metric m) {
  MetricEstimate e;
  e.metric = m;
  e.replicates = static_cast<int>(x.size());
  if (x.empty()) return e;
  e.mean = pairwise_sum(x.data(), x.size()) / x.size();
  if (x.size() > 1) {
    std::vector<double> d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = (x[i] - e.mean) * (x[i] - e.mean);
    double var = pairwise_sum(d.data(), d.size()) / (x.size() - 1);
    e.std_err = std::sqrt(var / x.size());
  }
  return e;
}

inline Estimate estimate(const EstimateRequest& req) {
  auto s = estimate_samples(req);
  const std::size_t nm = req.metrics.size();
  Estimate est;
  std::vector<double> col(req.replicates);
  for (std::size_t k = 0; k < nm; ++k) {
    for (int r = 0; r < req.replicates; ++r) col[r] = s[r * nm + k];
    est.values.push_back(summarize(col, req.metrics[k]));
  }
  return est;
}

struct EstimateRow {
  Variant variant = Variant::base;
  double alpha = 0, alpha_f = 0, B = 0, b_l = 0, b_r = 0;
  Metric metric = Metric::mu;
  double mean = 0, std_err = 0;
  int replicates = 0;
  std::uint64_t seed = 0;
};

inline std::string fmt_num(double x) {
  if (std::isnan(x)) return "undefined";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline const char* estimate_csv_header() {
  return "variant,alpha,alpha_f,B,b_l,b_r,metric,mean,std_err,replicates,seed";
}

inline std::string to_csv_line(const EstimateRow& r) {
  return std::string(to_string(r.variant)) + "," + fmt_num(r.alpha) + "," + fmt_num(r.alpha_f) +
         "," + fmt_num(r.B) + "," + fmt_num(r.b_l) + "," + fmt_num(r.b_r) + "," +
         to_string(r.metric) + "," + fmt_num(r.mean) + "," + fmt_num(r.std_err) + "," +
         std::to_string(r.replicates) + "," + std::to_string(r.seed);
}

inline std::string rows_to_csv(const std::vector<EstimateRow>& rows) {
  std::string s = std::string(estimate_csv_header()) + "\n";
  for (const auto& r : rows) s += to_csv_line(r) + "\n";
  return s;
}

inline nlohmann::json rows_to_json(const std::vector<EstimateRow>& rows) {
  auto a = nlohmann::json::array();
  for (const auto& r : rows)
    a.push_back({{"variant", to_string(r.variant)}, {"alpha", r.alpha}, {"alpha_f", r.alpha_f},
                 {"B", r.B}, {"b_l", r.b_l}, {"b_r", r.b_r}, {"metric", to_string(r.metric)},
                 {"mean", r.mean}, {"std_err", r.std_err}, {"replicates", r.replicates},
                 {"seed", r.seed}});
  return a;
}

inline std::vector<EstimateRow> estimate_rows(const EstimateRequest& req) {
  auto est = estimate(req);
  std::vector<EstimateRow> rows;
  for (const auto& v : est.values)
    rows.push_back({req.variant, req.params.alpha, req.params.alpha_f, req.alloc.B(),
                    req.alloc.b_l, req.alloc.b_r, v.metric, v.mean, v.std_err, v.replicates,
                    req.master_seed});
  return rows;
}

// b_l runs over {0, B/(g-1), ..., B} with b_r = B - b_l
inline std::vector<EstimateRow> sweep_allocations(Variant variant, const ModelParams& params,
                                                  double B, int grid_points,
                                                  const std::vector<Metric>& metrics,
                                                  int replicates, std::uint64_t master_seed,
                                                  int threads = 0) {
  if (grid_points < 2) throw InvalidParams("grid_points must be >= 2");
  std::vector<EstimateRow> rows;
  for (int t = 0; t < grid_points; ++t) {
    double bl = B * t / (grid_points - 1);
    if (t == grid_points - 1) bl = B;
    EstimateRequest req{variant, params, {bl, B - bl}, replicates, metrics, master_seed, threads};
    auto r = estimate_rows(req);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return rows;
}

struct HeatmapCell {
  double alpha = 0, alpha_f = 0, B = 0;
  Metric metric = Metric::mu;
  MetricEstimate balanced, one_sided;
  double ratio = 0;  // NaN when the one-sided mean is 0
  double z = 0;      // (balanced - one_sided) / combined SE
};

inline const char* heatmap_csv_header() {
  return "variant,alpha,alpha_f,B,metric,balanced_mean,balanced_se,one_sided_mean,one_sided_se,"
         "ratio,z,replicates,seed";
}

inline std::vector<HeatmapCell> heatmap_ratio(Variant variant, const ModelParams& base,
                                              const std::vector<double>& alphas,
                                              const std::vector<double>& gaps, double B,
                                              Metric metric, int replicates,
                                              std::uint64_t master_seed, int threads = 0) {
  std::vector<HeatmapCell> cells;
  for (double a : alphas)
    for (double d : gaps) {
      if (!(d > 0)) throw InvalidParams("alpha_f - alpha must be positive on every cell");
      ModelParams p = base;
      p.alpha = a;
      p.alpha_f = a + d;
      HeatmapCell c;
      c.alpha = a;
      c.alpha_f = p.alpha_f;
      c.B = B;
      c.metric = metric;
      c.balanced =
          estimate({variant, p, {B / 2, B / 2}, replicates, {metric}, master_seed, threads})
              .values[0];
      c.one_sided =
          estimate({variant, p, {B, 0.0}, replicates, {metric}, master_seed, threads}).values[0];
      c.ratio = c.one_sided.mean == 0.0 ? std::nan("") : c.balanced.mean / c.one_sided.mean;
      double se = std::hypot(c.balanced.std_err, c.one_sided.std_err);
      double diff = c.balanced.mean - c.one_sided.mean;
      c.z = se > 0 ? diff / se : (diff == 0 ? 0.0 : std::copysign(INFINITY, diff));
      cells.push_back(c);
    }
  return cells;
}

inline std::string heatmap_to_csv(Variant v, const std::vector<HeatmapCell>& cells,
                                  std::uint64_t seed) {
  std::string s = std::string(heatmap_csv_header()) + "\n";
  for (const auto& c : cells)
    s += std::string(to_string(v)) + "," + fmt_num(c.alpha) + "," + fmt_num(c.alpha_f) + "," +
         fmt_num(c.B) + "," + to_string(c.metric) + "," + fmt_num(c.balanced.mean) + "," +
         fmt_num(c.balanced.std_err) + "," + fmt_num(c.one_sided.mean) + "," +
         fmt_num(c.one_sided.std_err) + "," + fmt_num(c.ratio) + "," + fmt_num(c.z) + "," +
         std::to_string(c.balanced.replicates) + "," + std::to_string(seed) + "\n";
  return s;
}

}  // namespace flexmatch
