#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "estimator.hpp"
#include "ks.hpp"
#include "parallel.hpp"

namespace flexmatch {

// alpha = 0 sits on the edge of the solver's domain, so experiment specs default to 1e-6
inline constexpr double kAlphaZero = 1e-6;

struct ProfitSpec {
  double c = 0.0;
  double d = 1.0;  // cost exponent
  double alpha = kAlphaZero;
  double alpha_f = 1.0;
};

inline void check_spec(const ProfitSpec& s) {
  if (!(s.c >= 0)) throw InvalidParams("c must be nonnegative");
  if (!(s.d >= 1)) throw InvalidParams("cost exponent must be >= 1");
  if (!(s.alpha >= 0 && s.alpha_f > s.alpha)) throw InvalidParams("needs alpha_f > alpha >= 0");
}

inline double profit_cost(const ProfitSpec& s, const FlexAllocation& a) {
  return s.c * (std::pow(a.b_l, s.d) + std::pow(a.b_r, s.d));
}

inline double profit(const ProfitSpec& s, const FlexAllocation& a) {
  check_spec(s);
  check_alloc(a);
  return mu_ks(s.alpha, s.alpha_f, a) - profit_cost(s, a);
}

enum class TrajectoryMode { coordinate, joint };
enum class TerminalClass { local_NE, saddle_suspect, boundary, global_candidate };

inline const char* to_string(TrajectoryMode m) {
  return m == TrajectoryMode::coordinate ? "coordinate" : "joint";
}

inline TrajectoryMode parse_mode(const std::string& s) {
  if (s == "coordinate") return TrajectoryMode::coordinate;
  if (s == "joint") return TrajectoryMode::joint;
  throw InvalidParams("unknown trajectory mode: " + s);
}

inline const char* to_string(TerminalClass t) {
  switch (t) {
    case TerminalClass::local_NE: return "local_NE";
    case TerminalClass::saddle_suspect: return "saddle_suspect";
    case TerminalClass::boundary: return "boundary";
    case TerminalClass::global_candidate: return "global_candidate";
  }
  return "?";
}

struct TrajectoryPoint {
  double b_l, b_r, g;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  double gamma = 0;
  TrajectoryMode mode = TrajectoryMode::coordinate;
  FlexAllocation terminal;
  TerminalClass terminal_class = TerminalClass::local_NE;
  bool subcritical = true;

  nlohmann::json to_json() const {
    auto pts = nlohmann::json::array();
    for (const auto& p : points) pts.push_back({p.b_l, p.b_r, p.g});
    return {{"gamma", gamma}, {"mode", to_string(mode)}, {"points", pts},
            {"terminal", {terminal.b_l, terminal.b_r}},
            {"terminal_class", to_string(terminal_class)}, {"subcritical", subcritical}};
  }
};

inline constexpr double kImprove = 1e-12;

namespace detail {

// b_l moves first, then b_r moves, then diagonals
inline constexpr std::array<std::array<int, 2>, 8> kCompass{
    {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};

inline bool inside(double x) { return x >= -1e-12 && x <= 1 + 1e-12; }
inline double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

// trim accumulated rounding so lattice points print and compare cleanly
inline double snap(double x) { return clamp01(std::round(x * 1e12) / 1e12); }

struct Probe {
  bool feasible = false;
  double b_l = 0, b_r = 0, g = 0;
};

inline Probe probe(const ProfitSpec& s, double bl, double br, int dl, int dr, double step) {
  Probe p;
  double nl = bl + dl * step, nr = br + dr * step;
  if (!inside(nl) || !inside(nr)) return p;
  p.feasible = true;
  p.b_l = snap(nl);
  p.b_r = snap(nr);
  p.g = profit(s, {p.b_l, p.b_r});
  return p;
}

}  // namespace detail

struct LandscapePoint {
  double b_l, b_r, mu_ks, cost, g;
  bool subcritical;
};

inline std::vector<LandscapePoint> landscape_grid(const ProfitSpec& s, int resolution,
                                                  int threads = 0) {
  check_spec(s);
  if (resolution < 2) throw InvalidParams("resolution must be >= 2");
  const int r = resolution;
  std::vector<LandscapePoint> out(static_cast<std::size_t>(r) * r);
  parallel_for(out.size(), threads, [&](std::size_t i) {
    double bl = static_cast<double>(i / r) / (r - 1), br = static_cast<double>(i % r) / (r - 1);
    double mu = mu_ks(s.alpha, s.alpha_f, {bl, br});
    double cost = profit_cost(s, {bl, br});
    out[i] = {bl, br, mu, cost, mu - cost, is_subcritical(s.alpha, s.alpha_f)};
  });
  return out;
}

inline const char* landscape_csv_header() { return "b_l,b_r,mu_ks,cost,g,subcritical"; }

inline std::string landscape_to_csv(const std::vector<LandscapePoint>& pts) {
  std::string s = std::string(landscape_csv_header()) + "\n";
  for (const auto& p : pts)
    s += fmt_num(p.b_l) + "," + fmt_num(p.b_r) + "," + fmt_num(p.mu_ks) + "," + fmt_num(p.cost) +
         "," + fmt_num(p.g) + "," + (p.subcritical ? "true" : "false") + "\n";
  return s;
}

inline double landscape_max(const ProfitSpec& s, int resolution, int threads = 0) {
  double m = -INFINITY;
  for (const auto& p : landscape_grid(s, resolution, threads)) m = std::max(m, p.g);
  return m;
}

inline TerminalClass classify_terminal(const ProfitSpec& s, double bl, double br, double g,
                                       double gamma, int threads = 0) {
  bool axis = false, diag = false;
  for (int k = 0; k < 8; ++k) {
    auto p = detail::probe(s, bl, br, detail::kCompass[k][0], detail::kCompass[k][1], gamma);
    if (p.feasible && p.g > g + kImprove) (k < 4 ? axis : diag) = true;
  }
  if (!axis && diag) return TerminalClass::saddle_suspect;
  if (!axis && !diag && g >= landscape_max(s, 41, threads) - 1e-9)
    return TerminalClass::global_candidate;
  if (bl <= 1e-12 || br <= 1e-12 || bl >= 1 - 1e-12 || br >= 1 - 1e-12)
    return TerminalClass::boundary;
  return TerminalClass::local_NE;
}

// Greedy ascent with step gamma. Coordinate mode alternates b_l, b_r; joint mode looks at all
// 8 compass moves. Only strict improvements are taken.
inline Trajectory run_trajectory(const ProfitSpec& s, const FlexAllocation& start, double gamma,
                                 TrajectoryMode mode, int max_steps = 10000, int threads = 0) {
  check_spec(s);
  check_alloc(start);
  if (!(gamma > 0)) throw InvalidParams("gamma must be positive");
  Trajectory t;
  t.gamma = gamma;
  t.mode = mode;
  t.subcritical = is_subcritical(s.alpha, s.alpha_f);
  double bl = start.b_l, br = start.b_r, g = profit(s, start);
  t.points.push_back({bl, br, g});
  int coord = 0;
  for (int step = 0; step < max_steps; ++step) {
    detail::Probe best;
    best.g = g;
    if (mode == TrajectoryMode::coordinate) {
      for (int attempt = 0; attempt < 2 && !best.feasible; ++attempt) {
        int c = (coord + attempt) % 2;
        for (int sgn : {1, -1}) {
          auto p = detail::probe(s, bl, br, c == 0 ? sgn : 0, c == 1 ? sgn : 0, gamma);
          if (p.feasible && p.g > best.g + kImprove) best = p;
        }
        if (best.feasible) coord = 1 - c;
      }
    } else {
      for (auto [dl, dr] : detail::kCompass) {
        auto p = detail::probe(s, bl, br, dl, dr, gamma);
        if (p.feasible && p.g > best.g + kImprove) best = p;
      }
    }
    if (!best.feasible) break;
    bl = best.b_l;
    br = best.b_r;
    g = best.g;
    t.points.push_back({bl, br, g});
  }
  t.terminal = {bl, br};
  t.terminal_class = classify_terminal(s, bl, br, g, gamma, threads);
  return t;
}

enum class Stationary { local_NE, saddle, local_max, none };

inline const char* to_string(Stationary s) {
  switch (s) {
    case Stationary::local_NE: return "local_NE";
    case Stationary::saddle: return "saddle";
    case Stationary::local_max: return "local_max";
    case Stationary::none: return "none";
  }
  return "?";
}

// second directional derivative of g along (dl, dr) by central differences
inline double profit_sod_fd(const ProfitSpec& s, const FlexAllocation& a, double dl, double dr,
                            double h = 1e-3) {
  double gp = profit(s, {a.b_l + dl * h, a.b_r + dr * h});
  double g0 = profit(s, a);
  double gm = profit(s, {a.b_l - dl * h, a.b_r - dr * h});
  return (gp - 2 * g0 + gm) / (h * h);
}

struct ProfitSods {
  double axis_l, axis_r, diag;
};

inline ProfitSods profit_sods(const ProfitSpec& s, const FlexAllocation& a) {
  const bool center = std::fabs(a.b_l - 0.5) < 1e-12 && std::fabs(a.b_r - 0.5) < 1e-12;
  if (center && in_certified_regime(s.alpha, s.alpha_f)) {
    // closed forms for mu at (1/2,1/2); the cost term is separable
    auto sod = directional_sod_balanced(s.alpha, s.alpha_f);
    double cc = s.d == 1 ? 0.0 : s.c * s.d * (s.d - 1) * std::pow(0.5, s.d - 2);
    return {sod.sod_budget - cc, sod.sod_budget - cc, sod.sod_diag - 2 * cc};
  }
  return {profit_sod_fd(s, a, 1, 0), profit_sod_fd(s, a, 0, 1), profit_sod_fd(s, a, 1, -1)};
}

inline Stationary classify_stationary_point(const ProfitSpec& s, const FlexAllocation& a,
                                            double probe_step) {
  check_spec(s);
  if (!(probe_step > 0)) throw InvalidParams("probe_step must be positive");
  const double h = std::max(probe_step, 1e-3);
  if (!(a.b_l - h > 0 && a.b_l + h < 1 && a.b_r - h > 0 && a.b_r + h < 1)) return Stationary::none;
  const double g = profit(s, a);
  bool axis = false, diag = false;
  for (int k = 0; k < 8; ++k) {
    auto p = detail::probe(s, a.b_l, a.b_r, detail::kCompass[k][0], detail::kCompass[k][1],
                           probe_step);
    if (p.g > g + kImprove) (k < 4 ? axis : diag) = true;
  }
  if (axis) return Stationary::none;
  if (!diag) return Stationary::local_max;
  auto sods = profit_sods(s, a);
  if (sods.axis_l < 0 && sods.axis_r < 0 && sods.diag > 0) return Stationary::saddle;
  return Stationary::local_NE;
}

// ---- diagonal comparisons ----

struct LineOptimum {
  double b_l = 0, b_r = 0, g = -INFINITY;
};

inline LineOptimum best_on_balanced_line(const ProfitSpec& s, int points, int threads = 0) {
  std::vector<double> g(points);
  parallel_for(points, threads, [&](std::size_t i) {
    double t = static_cast<double>(i) / (points - 1);
    g[i] = profit(s, {t, t});
  });
  LineOptimum o;
  for (int i = 0; i < points; ++i) {
    double t = static_cast<double>(i) / (points - 1);
    if (g[i] > o.g) o = {t, t, g[i]};
  }
  return o;
}

inline LineOptimum best_on_one_sided_line(const ProfitSpec& s, int points, int threads = 0) {
  std::vector<double> g(points);
  parallel_for(points, threads, [&](std::size_t i) {
    double t = static_cast<double>(i) / (points - 1);
    g[i] = profit(s, {t, 0.0});
  });
  LineOptimum o;
  for (int i = 0; i < points; ++i) {
    double t = static_cast<double>(i) / (points - 1);
    if (g[i] > o.g) o = {t, 0.0, g[i]};
  }
  return o;
}

struct OptimumComparison {
  LineOptimum balanced, one_sided;
  double global = 0;           // best of the two lines and a coarse 2D grid
  double balanced_ratio = 0;   // balanced / global
  double one_sided_ratio = 0;  // one-sided / global
  bool subcritical = true;
};

inline OptimumComparison compare_line_optima(const ProfitSpec& s, int points = 201,
                                             int grid_resolution = 41, int threads = 0) {
  check_spec(s);
  if (points < 2) throw InvalidParams("points must be >= 2");
  if (grid_resolution < 0 || grid_resolution == 1) throw InvalidParams("grid_resolution must be 0 or >= 2");
  OptimumComparison c;
  c.balanced = best_on_balanced_line(s, points, threads);
  c.one_sided = best_on_one_sided_line(s, points, threads);
  c.global = std::max(c.balanced.g, c.one_sided.g);
  if (grid_resolution >= 2) c.global = std::max(c.global, landscape_max(s, grid_resolution, threads));
  c.balanced_ratio = c.balanced.g / c.global;
  c.one_sided_ratio = c.one_sided.g / c.global;
  c.subcritical = is_subcritical(s.alpha, s.alpha_f);
  return c;
}

// b_l over {0, B/(g-1), ..., B} with b_r = B - b_l; returns the argmax b_l
inline double budget_line_argmax(const ProfitSpec& s, double B, int points, int threads = 0) {
  std::vector<double> g(points);
  parallel_for(points, threads, [&](std::size_t i) {
    double bl = B * i / (points - 1);
    g[i] = profit(s, {bl, std::max(0.0, B - bl)});
  });
  int best = 0;
  for (int i = 1; i < points; ++i)
    if (g[i] > g[best] + kImprove) best = i;
  return B * best / (points - 1);
}

enum class AllocationCategory { one_sided, balanced, intermediate };

inline const char* to_string(AllocationCategory a) {
  switch (a) {
    case AllocationCategory::one_sided: return "one_sided";
    case AllocationCategory::balanced: return "balanced";
    case AllocationCategory::intermediate: return "intermediate";
  }
  return "?";
}

// within 10% of the budget from an endpoint, or from the midpoint
inline AllocationCategory categorize_split(double b_l, double B) {
  if (!(B > 0)) return AllocationCategory::balanced;
  double t = b_l / B;
  if (t <= 0.1 || t >= 0.9) return AllocationCategory::one_sided;
  if (std::fabs(t - 0.5) <= 0.1) return AllocationCategory::balanced;
  return AllocationCategory::intermediate;
}

struct CostComparison {
  double argmax_linear = 0, argmax_convex = 0;
  AllocationCategory linear = AllocationCategory::one_sided;
  AllocationCategory convex = AllocationCategory::one_sided;
  bool changed() const { return linear != convex; }
};

// argmax of b_l along b_l + b_r = B under cost exponent 1 versus `d`
inline CostComparison convex_cost_comparison(double alpha, double alpha_f, double c, double d,
                                             double B = 1.0, int points = 201, int threads = 0) {
  ProfitSpec lin{c, 1.0, alpha, alpha_f}, cvx{c, d, alpha, alpha_f};
  CostComparison r;
  r.argmax_linear = budget_line_argmax(lin, B, points, threads);
  r.argmax_convex = budget_line_argmax(cvx, B, points, threads);
  r.linear = categorize_split(r.argmax_linear, B);
  r.convex = categorize_split(r.argmax_convex, B);
  return r;
}

}  // namespace flexmatch
