#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "flexmatch/cli.hpp"

using namespace flexmatch;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  json summary;
  std::string err;
};

Result call(std::vector<std::string> args, const cli::Hooks* base = nullptr) {
  args.insert(args.begin(), "flexmatch");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  cli::Hooks h = base ? *base : cli::Hooks{};
  h.out = &out;
  h.err = &err;
  int code = cli::run(static_cast<int>(argv.size()), argv.data(), h);
  std::string line = out.str();
  REQUIRE(std::count(line.begin(), line.end(), '\n') == 1);
  return {code, json::parse(line), err.str()};
}

fs::path scratch() {
  auto d = fs::temp_directory_path() / "flexmatch_cli_test";
  fs::create_directories(d);
  return d;
}

std::string out_file(const std::string& name) { return (scratch() / name).string(); }

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST_CASE("summary line reports command, exit and status") {
  auto r = call({"phi", "--alpha", "0.2", "--alpha-f", "1", "--B", "0.5"});
  CHECK(r.code == cli::kOk);
  CHECK(r.summary["command"] == "phi");
  CHECK(r.summary["exit"] == 0);
  CHECK(r.summary["status"] == "ok");
  CHECK(r.summary["optimal"].is_string());
}

TEST_CASE("degenerate simulation gives zero") {
  auto f = out_file("sim0.csv");
  auto r = call({"simulate", "--alpha", "0", "--alpha-f", "1", "--B", "0", "--replicates", "10",
                 "--out", f});
  CHECK(r.code == 0);
  CHECK(r.summary["mean_mu"] == 0.0);
  auto csv = read_file(f);
  CHECK(first_line(csv) == estimate_csv_header());
  auto rows = csv_to_json(csv);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0]["mean"] == 0.0);
  CHECK(rows[0]["std_err"] == 0.0);
  CHECK_FALSE(fs::exists(f + ".tmp"));
}

TEST_CASE("every command runs") {
  std::vector<std::vector<std::string>> runs{
      {"simulate", "--replicates", "5", "--metric", "mu,phi,ks"},
      {"sweep", "--replicates", "3", "--grid-points", "3"},
      {"heatmap", "--replicates", "3", "--alphas", "0.1,0.2", "--gaps", "1"},
      {"phi"},
      {"thresholds"},
      {"ks", "--bl", "0.5", "--br", "0.5"},
      {"ks-sweep", "--alphas", "0.1", "--gaps", "1,2"},
      {"verify", "--delta", "0.1"},
      {"verify", "--kind", "sod", "--delta", "0.1"},
      {"verify", "--kind", "f1", "--delta", "0.1"},
      {"coupling", "--n", "20", "--replicates", "20", "--exhaustive-edges", "1"},
      {"experiment", "--gamma", "0.3"},
      {"landscape", "--resolution", "5", "--points", "5"}};
  for (auto& a : runs) {
    auto r = call(a);
    CHECK_MESSAGE(r.code == 0, a[0] << ": " << r.err);
    CHECK(r.summary["command"] == a[0]);
  }
}

TEST_CASE("tables carry their headers") {
  struct Case {
    std::vector<std::string> args;
    std::string header;
  };
  std::vector<Case> cases{
      {{"sweep", "--replicates", "2", "--grid-points", "2"}, estimate_csv_header()},
      {{"heatmap", "--replicates", "2", "--alphas", "0.1", "--gaps", "1"}, heatmap_csv_header()},
      {{"ks-sweep", "--alphas", "0.1", "--gaps", "1"}, cli::ks_sweep_csv_header()},
      {{"verify", "--delta", "0.1"}, certificate_csv_header()},
      {{"verify", "--kind", "sod", "--delta", "0.1"}, sod_csv_header()},
      {{"landscape", "--resolution", "3"}, landscape_csv_header()},
      {{"experiment", "--gamma", "0.5"}, "step,b_l,b_r,g"}};
  int i = 0;
  for (auto& c : cases) {
    auto f = out_file("hdr" + std::to_string(i++) + ".csv");
    c.args.push_back("--out");
    c.args.push_back(f);
    REQUIRE(call(c.args).code == 0);
    CHECK(first_line(read_file(f)) == c.header);
  }
}

TEST_CASE("empty verification region is a header-only table and exit 0") {
  auto f = out_file("empty.csv");
  auto r = call({"verify", "--alpha-lo", "1", "--alpha-hi", "0.5", "--out", f});
  CHECK(r.code == 0);
  CHECK(r.summary["cells"] == 0);
  CHECK(read_file(f) == std::string(certificate_csv_header()) + "\n");
}

TEST_CASE("exit codes") {
  CHECK(call({"simulate", "--alpha", "3", "--alpha-f", "2"}).code == cli::kValidation);
  CHECK(call({"bogus"}).code == cli::kValidation);
  CHECK(call({}).code == cli::kValidation);
  CHECK(call({"simulate", "--format", "xml"}).code == cli::kValidation);
  CHECK(call({"simulate", "--replicates", "0"}).code == cli::kValidation);
  CHECK(call({"simulate", "--bl", "0.5", "--br", "0.5", "--B", "0.7"}).code == cli::kValidation);
  CHECK(call({"simulate", "--alpha", "x"}).code == cli::kValidation);
  CHECK(call({"simulate", "--nope", "1"}).code == cli::kValidation);
  CHECK(call({"simulate", "--n", "10", "--alpha-f", "6"}).code == cli::kValidation);
  auto nc = call({"ks", "--max-steps", "3"});
  CHECK(nc.code == cli::kNonConvergence);
  CHECK(nc.summary["status"] == "non_convergence");
  CHECK_FALSE(nc.err.empty());
}

TEST_CASE("a faulty matcher triggers the violation exit") {
  cli::Hooks h;
  h.matcher = [](const BipartiteGraph& g) { return -max_matching_size(g); };
  auto r = call({"coupling", "--n", "20", "--replicates", "50"}, &h);
  CHECK(r.code == cli::kViolation);
  CHECK(r.summary["status"] == "violation");
  CHECK(r.summary["violations"].get<long>() > 0);
  CHECK(call({"coupling", "--n", "20", "--replicates", "50"}).code == cli::kOk);
}

TEST_CASE("flags override config values") {
  auto cfg = out_file("cfg.json");
  write_atomic(cfg, R"({"command": "phi", "alpha": 0.2, "alpha_f": 1.0, "B": 0.5})");
  auto a = call({"--config", cfg});
  CHECK(a.code == 0);
  CHECK(a.summary["command"] == "phi");
  CHECK(a.summary["alpha"] == 0.2);
  auto b = call({"--config", cfg, "--alpha", "0.3"});
  CHECK(b.summary["alpha"] == 0.3);
  CHECK(b.summary["alpha_f"] == 1.0);
  auto c = call({"thresholds", "--config", cfg});
  CHECK(c.summary["command"] == "thresholds");
  CHECK(c.summary["B"] == 0.5);
  auto bad = out_file("bad.json");
  write_atomic(bad, "{not json");
  CHECK(call({"--config", bad}).code == cli::kValidation);
  CHECK(call({"--config", out_file("missing.json")}).code == cli::kValidation);
}

TEST_CASE("thread count does not change output bytes") {
  std::vector<std::vector<std::string>> runs{
      {"simulate", "--replicates", "40", "--metric", "mu,phi,psi_naive,psi_prior,ks", "--B", "0.7",
       "--bl", "0.4", "--seed", "3"},
      {"sweep", "--replicates", "20", "--grid-points", "4", "--variant", "spatial"},
      {"heatmap", "--replicates", "10", "--alphas", "0.2,0.4", "--gaps", "1,2"},
      {"ks-sweep", "--alphas", "0.1,0.5", "--gaps", "1,2"},
      {"verify", "--delta", "0.05"},
      {"landscape", "--resolution", "6"}};
  int i = 0;
  for (auto a : runs) {
    std::string f1 = out_file("t1_" + std::to_string(i) + ".csv");
    std::string f4 = out_file("t4_" + std::to_string(i) + ".csv");
    ++i;
    auto a1 = a, a4 = a;
    a1.insert(a1.end(), {"--threads", "1", "--out", f1});
    a4.insert(a4.end(), {"--threads", "4", "--out", f4});
    REQUIRE(call(a1).code == 0);
    REQUIRE(call(a4).code == 0);
    CHECK(read_file(f1) == read_file(f4));
  }
}

TEST_CASE("json output format") {
  auto f = out_file("sim.json");
  REQUIRE(call({"simulate", "--replicates", "4", "--format", "json", "--out", f}).code == 0);
  auto j = read_json_file(f);
  REQUIRE(j.is_array());
  CHECK(j[0]["metric"] == "mu");
  CHECK(j[0]["replicates"] == 4);
  auto t = out_file("traj.json");
  auto l = out_file("land.csv");
  REQUIRE(call({"experiment", "--gamma", "0.3", "--format", "json", "--out", t, "--landscape-out", l,
                "--resolution", "4"})
              .code == 0);
  auto tj = read_json_file(t);
  CHECK(tj["terminal"].size() == 2);
  CHECK(tj["spec"]["c"] == 0.4);
  CHECK(first_line(read_file(l)) == landscape_csv_header());
}

TEST_CASE("csv to json conversion") {
  auto j = csv_to_json("a,b,c\n1.5,true,x\nundefined,false,2\n");
  REQUIRE(j.size() == 2);
  CHECK(j[0]["a"] == 1.5);
  CHECK(j[0]["b"] == true);
  CHECK(j[0]["c"] == "x");
  CHECK(j[1]["c"] == 2);
}
