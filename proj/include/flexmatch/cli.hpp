#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "analytic.hpp"
#include "estimator.hpp"
#include "experiment.hpp"
#include "io.hpp"
#include "ks.hpp"
#include "verifier.hpp"

namespace flexmatch::cli {

using nlohmann::json;

enum Exit { kOk = 0, kValidation = 1, kNonConvergence = 2, kViolation = 3 };

struct Hooks {
  MatcherFn matcher = default_matcher;
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;
};

// thrown when a check the run is supposed to uphold fails
struct CertificateViolation : std::runtime_error {
  json summary;
  CertificateViolation(const std::string& m, json s) : std::runtime_error(m), summary(std::move(s)) {}
};

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"simulate", "sweep",    "heatmap", "phi",
                                          "thresholds", "ks",     "ks-sweep", "verify",
                                          "coupling", "experiment", "landscape"};
  return c;
}

// flag name -> config key
inline const std::vector<std::pair<std::string, std::string>>& flag_keys() {
  static const std::vector<std::pair<std::string, std::string>> f{
      {"--alpha", "alpha"},         {"--alpha-f", "alpha_f"},
      {"--B", "B"},                 {"--bl", "bl"},
      {"--br", "br"},               {"--n", "n"},
      {"--replicates", "replicates"}, {"--seed", "seed"},
      {"--delta", "delta"},         {"--eps", "eps"},
      {"--gamma", "gamma"},         {"--c", "c"},
      {"--cost-exponent", "cost_exponent"}, {"--lambda", "lambda"},
      {"--k", "k"},                 {"--variant", "variant"},
      {"--metric", "metric"},       {"--threads", "threads"},
      {"--out", "out"},             {"--format", "format"},
      {"--mode", "mode"},           {"--max-steps", "max_steps"},
      {"--resolution", "resolution"}, {"--grid-points", "grid_points"},
      {"--kind", "kind"},           {"--alpha-lo", "alpha_lo"},
      {"--alpha-hi", "alpha_hi"},   {"--alpha-f-lo", "alpha_f_lo"},
      {"--alpha-f-hi", "alpha_f_hi"}, {"--alphas", "alphas"},
      {"--gaps", "gaps"},           {"--budgets", "budgets"},
      {"--landscape-out", "landscape_out"}, {"--exhaustive-edges", "exhaustive_edges"},
      {"--tol", "tol"},             {"--points", "points"}};
  return f;
}

// Merged view of config file values and flag overrides.
class Config {
 public:
  explicit Config(json j) : j_(std::move(j)) {}

  bool has(const std::string& k) const { return j_.contains(k) && !j_[k].is_null(); }

  double num(const std::string& k, double def) const {
    if (!has(k)) return def;
    const json& v = j_[k];
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return parse_num(k, v.get<std::string>());
    throw InvalidParams("'" + k + "' must be a number");
  }

  long integer(const std::string& k, long def) const {
    double d = num(k, static_cast<double>(def));
    if (d != std::floor(d) || std::fabs(d) > 9e15) throw InvalidParams("'" + k + "' must be an integer");
    return static_cast<long>(d);
  }

  std::uint64_t seed(const std::string& k, std::uint64_t def) const {
    if (!has(k)) return def;
    const json& v = j_[k];
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return v.get<std::uint64_t>();
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      try {
        std::size_t pos = 0;
        if (!s.empty() && s[0] != '-') {
          auto x = std::stoull(s, &pos);
          if (pos == s.size()) return x;
        }
      } catch (...) {
      }
    }
    throw InvalidParams("'" + k + "' must be a nonnegative integer");
  }

  std::string str(const std::string& k, const std::string& def) const {
    if (!has(k)) return def;
    const json& v = j_[k];
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array()) {
      std::string s;
      for (const auto& e : v) s += (s.empty() ? "" : ",") + (e.is_string() ? e.get<std::string>() : e.dump());
      return s;
    }
    return v.dump();
  }

  std::vector<double> list(const std::string& k, const std::vector<double>& def) const {
    if (!has(k)) return def;
    const json& v = j_[k];
    std::vector<double> out;
    if (v.is_array()) {
      for (const auto& e : v) {
        if (!e.is_number()) throw InvalidParams("'" + k + "' must hold numbers");
        out.push_back(e.get<double>());
      }
      return out;
    }
    if (v.is_number()) return {v.get<double>()};
    std::stringstream ss(v.get<std::string>());
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) out.push_back(parse_num(k, item));
    return out;
  }

 private:
  static double parse_num(const std::string& k, const std::string& s) {
    if (s == "e") return std::exp(1.0);
    try {
      std::size_t pos = 0;
      double d = std::stod(s, &pos);
      if (pos == s.size()) return d;
    } catch (...) {
    }
    throw InvalidParams("'" + k + "' is not a number: " + s);
  }
  json j_;
};

inline std::vector<double> linspace(double lo, double hi, int count) {
  std::vector<double> v;
  for (int i = 0; i < count; ++i) v.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
  return v;
}

struct Common {
  std::string out, format;
  int threads = 0;
  std::uint64_t seed = 0;
};

inline Common common(const Config& c) {
  Common m;
  m.out = c.str("out", "");
  m.format = c.str("format", "csv");
  if (m.format != "csv" && m.format != "json") throw InvalidParams("format must be csv or json");
  m.threads = c.str("threads", "0") == "auto" ? 0 : static_cast<int>(c.integer("threads", 0));
  if (m.threads < 0) throw InvalidParams("threads must be >= 0 (0 = auto)");
  m.seed = c.seed("seed", 0);
  return m;
}

inline ModelParams model_params(const Config& c) {
  ModelParams p;
  p.alpha = c.num("alpha", 0.5);
  p.alpha_f = c.num("alpha_f", 2.0);
  p.n = static_cast<int>(c.integer("n", 100));
  p.k = static_cast<int>(c.integer("k", 2));
  p.lambda = c.num("lambda", 1.0);
  return p;
}

// --bl/--br win; --B alone means the one-sided (B, 0); --B with one side fills the other
inline FlexAllocation allocation(const Config& c, double def_bl, double def_br) {
  FlexAllocation a{def_bl, def_br};
  const bool hb = c.has("B"), hl = c.has("bl"), hr = c.has("br");
  const double B = c.num("B", 0.0);
  if (hl) a.b_l = c.num("bl", 0.0);
  if (hr) a.b_r = c.num("br", 0.0);
  if (hb && !hl && !hr) a = {B, 0.0};
  if (hb && hl && !hr) a.b_r = B - a.b_l;
  if (hb && hr && !hl) a.b_l = B - a.b_r;
  if (hb && hl && hr && std::fabs(a.B() - B) > 1e-12) throw InvalidParams("bl + br must equal B");
  check_alloc(a);
  return a;
}

inline std::vector<Metric> metrics(const Config& c) {
  std::vector<Metric> m;
  std::stringstream ss(c.str("metric", "mu"));
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) m.push_back(parse_metric(item));
  if (m.empty()) throw InvalidParams("no metric given");
  return m;
}

inline void require_replicates(long r) {
  if (r < 1) throw InvalidParams("replicates must be >= 1");
}

// writes the table (csv, or json rows) when an output path is set
inline void emit_table(const Common& m, const std::string& csv, json& summary) {
  if (m.out.empty()) return;
  write_atomic(m.out, m.format == "csv" ? csv : csv_to_json(csv).dump(2) + "\n");
  summary["out"] = m.out;
}

inline void emit_json(const Common& m, const json& doc, json& summary) {
  if (m.out.empty()) return;
  write_atomic(m.out, doc.dump(2) + "\n");
  summary["out"] = m.out;
}

inline json cmd_simulate(const Config& c, const Common& m) {
  EstimateRequest req;
  req.variant = parse_variant(c.str("variant", "base"));
  req.params = model_params(c);
  req.alloc = allocation(c, 1.0, 0.0);
  req.replicates = static_cast<int>(c.integer("replicates", 100));
  require_replicates(req.replicates);
  req.metrics = metrics(c);
  req.master_seed = m.seed;
  req.threads = m.threads;
  auto rows = estimate_rows(req);
  json s{{"rows", rows.size()}};
  for (const auto& r : rows) s["mean_" + std::string(to_string(r.metric))] = r.mean;
  emit_table(m, rows_to_csv(rows), s);
  return s;
}

inline json cmd_sweep(const Config& c, const Common& m) {
  auto p = model_params(c);
  long reps = c.integer("replicates", 100);
  require_replicates(reps);
  auto rows = sweep_allocations(parse_variant(c.str("variant", "base")), p, c.num("B", 1.0),
                                static_cast<int>(c.integer("grid_points", 11)), metrics(c),
                                static_cast<int>(reps), m.seed, m.threads);
  json s{{"rows", rows.size()}};
  emit_table(m, rows_to_csv(rows), s);
  return s;
}

inline json cmd_heatmap(const Config& c, const Common& m) {
  auto v = parse_variant(c.str("variant", "base"));
  auto mets = metrics(c);
  if (mets.size() != 1) throw InvalidParams("heatmap takes exactly one metric");
  long reps = c.integer("replicates", 100);
  require_replicates(reps);
  auto alphas = c.list("alphas", linspace(0.0, 3.0, 6));
  auto gaps = c.list("gaps", linspace(1.25, 7.5, 6));
  auto cells = heatmap_ratio(v, model_params(c), alphas, gaps, c.num("B", 1.0), mets[0],
                             static_cast<int>(reps), m.seed, m.threads);
  int better = 0;
  for (const auto& h : cells)
    if (h.z > 3) ++better;
  json s{{"cells", cells.size()}, {"balanced_significantly_better", better}};
  emit_table(m, heatmap_to_csv(v, cells, m.seed), s);
  return s;
}

inline json cmd_phi(const Config& c, const Common& m) {
  double a = c.num("alpha", 0.5), af = c.num("alpha_f", 2.0);
  auto alloc = allocation(c, 1.0, 0.0);
  auto v = phi_closed_form(a, af, alloc);
  double B = c.num("B", alloc.B());
  json doc{{"alpha", a}, {"alpha_f", af}, {"b_l", alloc.b_l}, {"b_r", alloc.b_r},
           {"phi1", v.phi1}, {"phi2", v.phi2}, {"phi", v.phi}};
  if (B <= 1.0) {
    doc["B"] = B;
    doc["criterion"] = phi_criterion(a, af, B);
    doc["optimal"] = to_string(phi_optimal_allocation(a, af, B));
  }
  json s = doc;
  emit_json(m, doc, s);
  return s;
}

inline json cmd_thresholds(const Config& c, const Common& m) {
  double B = c.num("B", 0.6), a = c.num("alpha", 0.05);
  auto t = asymmetry_thresholds(B, a);
  json doc{{"B", B}, {"alpha", a}, {"alpha_star", t.alpha_star}};
  doc["alpha_f_star"] = t.alpha_f_star ? json(*t.alpha_f_star) : json(nullptr);
  json s = doc;
  emit_json(m, doc, s);
  return s;
}

inline json ks_json(const KsSolution& k) {
  auto y = k.y.as_array();
  return {{"y", y},           {"xi", k.xi},           {"xi_hat", k.xi_hat},
          {"mu_ks", k.mu_ks}, {"iterations", k.iterations}, {"residual", k.residual},
          {"subcritical", k.subcritical}, {"accelerated", k.accelerated}};
}

inline json cmd_ks(const Config& c, const Common& m) {
  double a = c.num("alpha", 0.5), af = c.num("alpha_f", 2.0);
  auto alloc = allocation(c, 1.0, 0.0);
  auto k = solve_ks_fixed_point(a, af, alloc, c.num("tol", 1e-12),
                                c.integer("max_steps", 1000000));
  json doc = ks_json(k);
  doc["alpha"] = a;
  doc["alpha_f"] = af;
  doc["b_l"] = alloc.b_l;
  doc["b_r"] = alloc.b_r;
  json s = doc;
  emit_json(m, doc, s);
  return s;
}

inline const char* ks_sweep_csv_header() {
  return "alpha,alpha_f,B,mu_balanced,mu_one_sided,ratio,subcritical";
}

inline json cmd_ks_sweep(const Config& c, const Common& m) {
  auto alphas = c.list("alphas", linspace(0.0, 1.0, 11));
  auto gaps = c.list("gaps", linspace(0.25, 2.5, 10));
  auto budgets = c.list("budgets", {c.num("B", 1.0)});
  struct Row {
    double a, af, B, bal, one;
  };
  std::vector<Row> rows;
  for (double B : budgets)
    for (double a : alphas)
      for (double g : gaps) {
        if (!(g > 0) || !(a >= 0)) throw InvalidParams("needs alpha >= 0 and gaps > 0");
        if (!(B >= 0 && B <= 1)) throw InvalidParams("budgets must lie in [0,1]");
        rows.push_back({a, a + g, B, 0, 0});
      }
  parallel_for(rows.size(), m.threads, [&](std::size_t i) {
    auto& r = rows[i];
    r.bal = mu_ks(r.a, r.af, {r.B / 2, r.B / 2});
    r.one = mu_ks(r.a, r.af, {r.B, 0.0});
  });
  std::string csv = std::string(ks_sweep_csv_header()) + "\n";
  for (const auto& r : rows)
    csv += fmt_num(r.a) + "," + fmt_num(r.af) + "," + fmt_num(r.B) + "," + fmt_num(r.bal) + "," +
           fmt_num(r.one) + "," + fmt_num(r.one == 0 ? std::nan("") : r.bal / r.one) + "," +
           (is_subcritical(r.a, r.af) ? "true" : "false") + "\n";
  json s{{"rows", rows.size()}};
  emit_table(m, csv, s);
  return s;
}

inline json cmd_verify(const Config& c, const Common& m) {
  const std::string kind = c.str("kind", "comparison");
  double delta = c.num("delta", 0.01), eps = c.num("eps", 1e-8);
  if (!(delta > 0 && delta < 0.5)) throw InvalidParams("delta must lie in (0, 0.5)");
  if (!(eps > 0)) throw InvalidParams("eps must be positive");
  json s{{"kind", kind}, {"delta", delta}, {"eps", eps}};
  if (kind == "comparison") {
    auto r = certify_comparison_region(delta, eps, c.num("alpha_lo", 1e-4), c.num("alpha_hi", 0.5),
                                       c.num("alpha_f_lo", 1.0), c.num("alpha_f_hi", 2.0),
                                       m.threads);
    s["cells"] = r.cells.size();
    s["verified"] = r.verified;
    s["unverified"] = r.unverified;
    s["out_of_regime"] = r.out_of_regime;
    s["verified_fraction"] = r.verified_fraction();
    emit_table(m, certificates_to_csv(r.cells), s);
  } else if (kind == "sod") {
    auto r = certify_sod_region(delta, eps, m.threads);
    s["cells"] = r.interior;
    s["both_verified"] = r.both_verified;
    s["convex_only"] = r.convex_only;
    s["concave_only"] = r.concave_only;
    s["neither"] = r.neither;
    emit_table(m, sod_certificates_to_csv(r.cells), s);
  } else if (kind == "f1") {
    auto r = f1_monotonicity_sweep(delta, delta, m.threads);
    s["cells"] = r.cells;
    s["verified"] = r.verified;
    std::string csv = "alpha,alpha_f,x1\n";
    for (const auto& f : r.failures)
      csv += fmt_num(f[0]) + "," + fmt_num(f[1]) + "," + fmt_num(f[2]) + "\n";
    emit_table(m, csv, s);
  } else {
    throw InvalidParams("kind must be comparison, sod or f1");
  }
  return s;
}

inline json cmd_coupling(const Config& c, const Common& m, const Hooks& h) {
  int n = static_cast<int>(c.integer("n", 200));
  long reps = c.integer("replicates", 1000);
  require_replicates(reps);
  auto rep = coupling_inequality_check(n, c.num("alpha_f", 2.0), m.seed, static_cast<int>(reps),
                                       h.matcher, m.threads);
  json doc = rep.to_json();
  long ex_edges = c.integer("exhaustive_edges", 0);
  long ex_viol = 0;
  if (ex_edges > 0) {
    auto ex = coupling_exhaustive(n, static_cast<int>(ex_edges), h.matcher);
    doc["exhaustive"] = {{"max_edges", ex_edges}, {"cases", ex.cases}, {"violations", ex.violations}};
    ex_viol = ex.violations;
  }
  json s = doc;
  emit_json(m, doc, s);
  if (rep.violations > 0 || ex_viol > 0) throw CertificateViolation("coupling inequality violated", s);
  return s;
}

inline ProfitSpec profit_spec(const Config& c) {
  ProfitSpec p;
  p.c = c.num("c", 0.4);
  p.d = c.num("cost_exponent", 1.0);
  p.alpha = c.num("alpha", kAlphaZero);
  p.alpha_f = c.num("alpha_f", std::exp(1.0) / 2);
  check_spec(p);
  return p;
}

inline json cmd_experiment(const Config& c, const Common& m) {
  auto spec = profit_spec(c);
  FlexAllocation start{c.num("bl", 0.0), c.num("br", 0.0)};
  auto t = run_trajectory(spec, start, c.num("gamma", 0.02), parse_mode(c.str("mode", "coordinate")),
                          static_cast<int>(c.integer("max_steps", 10000)), m.threads);
  json doc = t.to_json();
  doc["spec"] = {{"c", spec.c}, {"cost_exponent", spec.d}, {"alpha", spec.alpha}, {"alpha_f", spec.alpha_f}};
  json s{{"steps", t.points.size() - 1}, {"terminal", doc["terminal"]},
         {"terminal_class", doc["terminal_class"]}, {"g", t.points.back().g}};
  if (!m.out.empty()) {
    if (m.format == "json") {
      write_atomic(m.out, doc.dump(2) + "\n");
    } else {
      std::string csv = "step,b_l,b_r,g\n";
      for (std::size_t i = 0; i < t.points.size(); ++i)
        csv += std::to_string(i) + "," + fmt_num(t.points[i].b_l) + "," + fmt_num(t.points[i].b_r) +
               "," + fmt_num(t.points[i].g) + "\n";
      write_atomic(m.out, csv);
    }
    s["out"] = m.out;
  }
  std::string lo = c.str("landscape_out", "");
  if (!lo.empty()) {
    auto grid = landscape_grid(spec, static_cast<int>(c.integer("resolution", 41)), m.threads);
    write_atomic(lo, landscape_to_csv(grid));
    s["landscape_out"] = lo;
  }
  return s;
}

inline json cmd_landscape(const Config& c, const Common& m) {
  auto spec = profit_spec(c);
  auto grid = landscape_grid(spec, static_cast<int>(c.integer("resolution", 41)), m.threads);
  auto best = std::max_element(grid.begin(), grid.end(),
                               [](const auto& a, const auto& b) { return a.g < b.g; });
  json s{{"points", grid.size()}, {"argmax", {best->b_l, best->b_r}}, {"max_g", best->g},
         {"subcritical", is_subcritical(spec.alpha, spec.alpha_f)}};
  int pts = static_cast<int>(c.integer("points", 0));
  if (pts >= 2) {
    auto cmp = compare_line_optima(spec, pts, static_cast<int>(c.integer("resolution", 41)), m.threads);
    s["balanced_line_best"] = {cmp.balanced.b_l, cmp.balanced.g};
    s["one_sided_line_best"] = {cmp.one_sided.b_l, cmp.one_sided.g};
    s["global_best"] = cmp.global;
    s["balanced_ratio"] = cmp.balanced_ratio;
    s["one_sided_ratio"] = cmp.one_sided_ratio;
  }
  emit_table(m, landscape_to_csv(grid), s);
  return s;
}

inline json dispatch(const std::string& cmd, const Config& c, const Hooks& h) {
  Common m = common(c);
  if (cmd == "simulate") return cmd_simulate(c, m);
  if (cmd == "sweep") return cmd_sweep(c, m);
  if (cmd == "heatmap") return cmd_heatmap(c, m);
  if (cmd == "phi") return cmd_phi(c, m);
  if (cmd == "thresholds") return cmd_thresholds(c, m);
  if (cmd == "ks") return cmd_ks(c, m);
  if (cmd == "ks-sweep") return cmd_ks_sweep(c, m);
  if (cmd == "verify") return cmd_verify(c, m);
  if (cmd == "coupling") return cmd_coupling(c, m, h);
  if (cmd == "experiment") return cmd_experiment(c, m);
  if (cmd == "landscape") return cmd_landscape(c, m);
  throw InvalidParams("unknown command: " + cmd);
}

inline void print_summary(const Hooks& h, json s, const std::string& cmd, int code) {
  s["command"] = cmd;
  s["exit"] = code;
  *h.out << s.dump() << std::endl;
}

inline int run(int argc, const char* const* argv, const Hooks& hooks = {}) {
  CLI::App app{"flexmatch: two-sided flexibility allocations in random bipartite graphs"};
  std::string command, config_path;
  app.add_option("command", command, "one of: simulate sweep heatmap phi thresholds ks ks-sweep "
                                     "verify coupling experiment landscape");
  app.add_option("--config", config_path, "JSON config; flags override its values");
  std::map<std::string, std::string> raw;
  std::map<std::string, CLI::Option*> opts;
  for (const auto& [flag, key] : flag_keys()) opts[key] = app.add_option(flag, raw[key]);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    *hooks.out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    *hooks.err << "error: " << e.what() << "\n";
    print_summary(hooks, {{"status", "error"}, {"message", e.what()}}, command, kValidation);
    return kValidation;
  }
  try {
    json merged = json::object();
    if (!config_path.empty()) {
      merged = read_json_file(config_path);
      if (!merged.is_object()) throw InvalidParams("config must be a JSON object");
    }
    for (const auto& [key, opt] : opts)
      if (opt->count() > 0) merged[key] = raw[key];
    if (command.empty() && merged.contains("command") && merged["command"].is_string())
      command = merged["command"].get<std::string>();
    if (command.empty()) throw InvalidParams("no command given");
    if (std::find(commands().begin(), commands().end(), command) == commands().end())
      throw InvalidParams("unknown command: " + command);
    if (!merged.contains("threads") || merged["threads"].is_null()) merged["threads"] = 0;
    json s = dispatch(command, Config(merged), hooks);
    s["status"] = "ok";
    print_summary(hooks, s, command, kOk);
    return kOk;
  } catch (const CertificateViolation& e) {
    *hooks.err << "certificate violation: " << e.what() << "\n";
    json s = e.summary;
    s["status"] = "violation";
    print_summary(hooks, s, command, kViolation);
    return kViolation;
  } catch (const NonConvergence& e) {
    *hooks.err << "non-convergence: " << e.what() << "\n";
    print_summary(hooks, {{"status", "non_convergence"}, {"message", e.what()}}, command,
                  kNonConvergence);
    return kNonConvergence;
  } catch (const std::exception& e) {
    *hooks.err << "error: " << e.what() << "\n";
    print_summary(hooks, {{"status", "error"}, {"message", e.what()}}, command, kValidation);
    return kValidation;
  }
}

}  // namespace flexmatch::cli
