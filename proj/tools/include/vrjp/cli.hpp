#pragma once

// Run configuration, report emission and the `vrjp` command line.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "vrjp/graph.hpp"
#include "vrjp/harness.hpp"
#include "vrjp/simulator.hpp"

namespace vrjp {

struct RunConfig {
  // Either a path to an edge-list file or inline edges.
  std::optional<std::string> graph_file;
  std::vector<std::tuple<int, int, double>> edges;
  int vertices = -1;  // -1: inferred from the edges
  Vertex i0 = 0;
  double sigma = 0.0;
  double sigma_prime = 0.0;  // defaults to sigma^schedule_exponent
  double schedule_exponent = 3.0;
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
  double M = 8.0;
  double alpha = 0.01;
  double quadrature_tolerance = 1e-8;
  int threads = 1;
  std::string out = ".";
  bool single_window = false;
  // converge
  std::vector<double> sigma_list{10.0, 100.0, 1000.0};
  int calibration_repetitions = 0;
  std::uint64_t calibration_n = 0;  // 0: same as n
  // density: {"name": ..., "points": [...]}
  nlohmann::json density;

  bool operator==(const RunConfig&) const = default;
};

// Throws ParseError (line, column) on malformed JSON and ValidationError
// naming the offending field.
RunConfig parse_config(const std::string& text);
nlohmann::json config_to_json(const RunConfig& cfg);
std::string serialize_config(const RunConfig& cfg);

// Graph with root i0. Throws ValidationError("graph") / ("i0").
WeightedGraph load_graph(const RunConfig& cfg);

// Observables CSV: header then one row per record, reals with 17
// significant digits.
void write_observables_header(std::ostream& out, const WeightedGraph& g);
void write_observables_row(std::ostream& out, const WeightedGraph& g, Vertex i0,
                           std::uint64_t index, const ObservableRecord& rec);

nlohmann::json report_to_json(const TestReport& r);
void write_reports_csv(std::ostream& out, const std::vector<TestReport>& reports);

// Evaluates the densities named in cfg.density; one CSV row per point.
void evaluate_densities(std::ostream& out, const WeightedGraph& g,
                        const nlohmann::json& spec);

std::string tree_string(const WeightedGraph& g, const DirectedTree& t);

// Exit codes: 0 success, 1 test failure or runtime error, 2 usage error.
int run_cli(int argc, const char* const* argv);

}  // namespace vrjp
