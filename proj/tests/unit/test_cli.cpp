#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "vrjp/cli.hpp"
#include "vrjp/errors.hpp"

using namespace vrjp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "vrjp");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("vrjp_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("config defaults") {
  auto cfg = parse_config(R"({"graph": {"edges": [[0, 1, 1.0]]}, "sigma": 10, "N": 5, "seed": 1})");
  CHECK(cfg.sigma_prime == doctest::Approx(1000.0));
  CHECK(cfg.M == 8.0);
  CHECK(cfg.alpha == 0.01);
  CHECK(cfg.threads == 1);
  CHECK(cfg.quadrature_tolerance == 1e-8);
  CHECK(cfg.i0 == 0);
  CHECK(cfg.sigma_list == std::vector<double>{10.0, 100.0, 1000.0});
}

TEST_CASE("config validation") {
  auto field_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ValidationError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of(R"({"graph": {"edges": [[0,1,1]]}, "sigma": -1, "N": 5, "seed": 1})") == "sigma");
  CHECK(field_of(R"({"graph": {"edges": [[0,1,1]]}, "sigma": 1, "seed": 1})") == "N");
  CHECK(field_of(R"({"graph": {"edges": [[0,1,1]]}, "sigma": 1, "N": 5, "seed": 1, "x": 2})") == "x");
  CHECK(field_of(R"({"graph": {"edges": [[0,1,-2]]}, "sigma": 1, "N": 5, "seed": 1})") == "graph");
  CHECK(field_of(R"({"graph": {"edges": [[0,1,1]]}, "sigma": 1, "N": 5, "seed": 1, "i0": 4})") == "i0");
  CHECK(field_of(R"({"graph": {"edges": [[0,1,1]]}, "sigma": 1, "N": 5, "seed": 1, "alpha": 2})") == "alpha");

  try {
    parse_config("{\n  \"sigma\": ,\n}");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("config round trip") {
  auto cfg = parse_config(slurp(vrjp::test::fixture_path("k2_config.json")));
  CHECK(parse_config(serialize_config(cfg)) == cfg);
  cfg.graph_file = "graph.txt";
  cfg.edges.clear();
  cfg.single_window = true;
  cfg.density = nlohmann::json{{"name", "pp_factor"}, {"points", nlohmann::json::array()}};
  CHECK(parse_config(serialize_config(cfg)) == cfg);
}

TEST_CASE("simulate is reproducible") {
  auto a = scratch("sim_a"), b = scratch("sim_b");
  const auto cfg = vrjp::test::fixture_path("k2_config.json");
  CHECK(run({"simulate", "--config", cfg, "--out", a.string()}) == 0);
  CHECK(run({"simulate", "--config", cfg, "--out", b.string(), "--threads", "3"}) == 0);
  const auto csv = slurp(a / "observables.csv");
  CHECK(csv == slurp(b / "observables.csv"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 201);
  CHECK(csv.rfind("trajectory,in_O,end1,end2,l_0,l_1", 0) == 0);
  auto back = parse_config(slurp(a / "config.json"));
  CHECK(back.seed == 7);
  CHECK(back.n == 200);
}

TEST_CASE("density subcommand") {
  auto dir = scratch("density");
  std::ofstream(dir / "cfg.json") << R"({
    "graph": {"edges": [[0, 1, 1.0]]}, "sigma": 1, "N": 1, "seed": 0,
    "density": [
      {"name": "pp_factor", "points": [{"i1": 0, "k": [1, 1], "l": [1, 1], "tree": [[0, 1]]}]},
      {"name": "path_count", "points": [{"i1": 0, "k": [5, 5], "tree": [[0, 1]]}]}
    ]})";
  CHECK(run({"density", "--config", (dir / "cfg.json").string(), "--out", dir.string()}) == 0);
  std::ostringstream direct;
  auto cfg = parse_config(slurp(dir / "cfg.json"));
  evaluate_densities(direct, load_graph(cfg), cfg.density);
  const auto text = direct.str();
  CHECK(text.find("0,0,pp_factor,-1.3862943611198906,0.25") != std::string::npos);
  CHECK(text.find("1,0,path_count,0,1") != std::string::npos);
}

TEST_CASE("exit codes") {
  CHECK(run({"frobnicate"}) == 2);
  CHECK(run({}) == 2);
  auto dir = scratch("bad");
  std::ofstream(dir / "neg.json") << R"({"graph": {"edges": [[0,1,1]]}, "sigma": -3, "N": 5, "seed": 1})";
  CHECK(run({"simulate", "--config", (dir / "neg.json").string()}) == 2);
  std::ofstream(dir / "broken.json") << "{\"sigma\": }";
  CHECK(run({"simulate", "--config", (dir / "broken.json").string()}) == 2);
  CHECK(run({"simulate", "--config", (dir / "missing.json").string()}) != 0);
  CHECK(run({"verify"}) == 0);
}

TEST_CASE("reports csv") {
  TestReport r;
  r.name = "ks_v1";
  r.statistic = 0.5;
  r.p_value = 0.25;
  r.passed = true;
  r.sample_size = 10;
  r.note = "a, b";
  std::ostringstream out;
  write_reports_csv(out, {r});
  CHECK(out.str() == "name,statistic,p_value,passed,alpha,sample_size,seed,note\n"
                     "ks_v1,0.5,0.25,1,0.01,10,0,\"a, b\"\n");
  auto j = report_to_json(r);
  CHECK(j["p_value"] == 0.25);
}
