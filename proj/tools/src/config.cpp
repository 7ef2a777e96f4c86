#include <cmath>
#include <limits>

#include "vrjp/cli.hpp"
#include "vrjp/errors.hpp"

namespace vrjp {

using nlohmann::json;

namespace {

const char* const kKnownKeys[] = {
    "graph", "i0", "sigma", "sigma_prime", "schedule_exponent", "N", "seed",
    "M", "alpha", "quadrature_tolerance", "threads", "out", "single_window",
    "sigma_list", "calibration_repetitions", "calibration_N", "density"};

double positive(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw ValidationError(key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x) || !(x > 0.0)) throw ValidationError(key, "must be positive");
  return x;
}

std::uint64_t unsigned_int(const json& j, const char* key, bool allow_zero) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw ValidationError(key, "expected an integer");
  if (v.is_number_unsigned()) {
    const auto x = v.get<std::uint64_t>();
    if (!allow_zero && x == 0) throw ValidationError(key, "must be positive");
    return x;
  }
  const auto x = v.get<std::int64_t>();
  if (x < 0 || (!allow_zero && x == 0))
    throw ValidationError(key, allow_zero ? "must be nonnegative" : "must be positive");
  return static_cast<std::uint64_t>(x);
}

int small_int(const json& j, const char* key, bool allow_zero) {
  const auto x = unsigned_int(j, key, allow_zero);
  if (x > static_cast<std::uint64_t>(std::numeric_limits<int>::max()))
    throw ValidationError(key, "too large");
  return static_cast<int>(x);
}

std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

void parse_graph(const json& g, RunConfig& cfg) {
  if (g.is_string()) {
    cfg.graph_file = g.get<std::string>();
    if (cfg.graph_file->empty()) throw ValidationError("graph", "empty path");
    return;
  }
  if (!g.is_object() || !g.contains("edges") || !g["edges"].is_array())
    throw ValidationError("graph", "expected a file path or {\"edges\": [[i, j, W], ...]}");
  for (auto it = g.begin(); it != g.end(); ++it)
    if (it.key() != "edges" && it.key() != "vertices")
      throw ValidationError("graph", "unknown key '" + it.key() + "'");
  for (const auto& e : g["edges"]) {
    if (!e.is_array() || e.size() != 3 || !e[0].is_number_integer() ||
        !e[1].is_number_integer() || !e[2].is_number())
      throw ValidationError("graph", "each edge must be [i, j, W]");
    const auto a = e[0].get<std::int64_t>(), b = e[1].get<std::int64_t>();
    const double w = e[2].get<double>();
    if (a < 0 || b < 0 || a > std::numeric_limits<int>::max() ||
        b > std::numeric_limits<int>::max())
      throw ValidationError("graph", "vertex index out of range");
    if (!std::isfinite(w) || !(w > 0.0))
      throw ValidationError("graph", "edge weights must be positive");
    cfg.edges.emplace_back(static_cast<int>(a), static_cast<int>(b), w);
  }
  if (g.contains("vertices")) cfg.vertices = small_int(g, "vertices", false);
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string msg = e.what();
    // Drop nlohmann's own "[json.exception.parse_error.101] parse error at ..." prefix.
    if (auto p = msg.find(": "); p != std::string::npos) msg = msg.substr(p + 2);
    throw ParseError("malformed config (" + msg + ")", line, col);
  }
  if (!j.is_object()) throw ValidationError("<root>", "config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : kKnownKeys) known = known || it.key() == k;
    if (!known) throw ValidationError(it.key(), "unknown field");
  }
  for (const char* k : {"graph", "sigma", "N", "seed"})
    if (!j.contains(k)) throw ValidationError(k, "required field missing");

  RunConfig cfg;
  parse_graph(j["graph"], cfg);
  if (j.contains("i0")) cfg.i0 = small_int(j, "i0", true);
  cfg.sigma = positive(j, "sigma");
  if (j.contains("schedule_exponent"))
    cfg.schedule_exponent = positive(j, "schedule_exponent");
  cfg.sigma_prime = j.contains("sigma_prime")
                        ? positive(j, "sigma_prime")
                        : std::pow(cfg.sigma, cfg.schedule_exponent);
  if (!std::isfinite(cfg.sigma_prime)) throw ValidationError("sigma_prime", "overflows");
  cfg.n = unsigned_int(j, "N", false);
  cfg.seed = unsigned_int(j, "seed", true);
  if (j.contains("M")) cfg.M = positive(j, "M");
  if (j.contains("alpha")) {
    cfg.alpha = positive(j, "alpha");
    if (!(cfg.alpha < 1.0)) throw ValidationError("alpha", "must lie in (0, 1)");
  }
  if (j.contains("quadrature_tolerance"))
    cfg.quadrature_tolerance = positive(j, "quadrature_tolerance");
  if (j.contains("threads")) cfg.threads = small_int(j, "threads", false);
  if (j.contains("out")) {
    if (!j["out"].is_string()) throw ValidationError("out", "expected a string");
    cfg.out = j["out"].get<std::string>();
  }
  if (j.contains("single_window")) {
    if (!j["single_window"].is_boolean())
      throw ValidationError("single_window", "expected true or false");
    cfg.single_window = j["single_window"].get<bool>();
  }
  if (j.contains("sigma_list")) {
    const auto& l = j["sigma_list"];
    if (!l.is_array() || l.size() < 2)
      throw ValidationError("sigma_list", "expected at least two numbers");
    cfg.sigma_list.clear();
    for (const auto& x : l) {
      if (!x.is_number() || !(x.get<double>() > 0.0))
        throw ValidationError("sigma_list", "entries must be positive numbers");
      if (!cfg.sigma_list.empty() && !(x.get<double>() > cfg.sigma_list.back()))
        throw ValidationError("sigma_list", "must be increasing");
      cfg.sigma_list.push_back(x.get<double>());
    }
  }
  if (j.contains("calibration_repetitions"))
    cfg.calibration_repetitions = small_int(j, "calibration_repetitions", true);
  if (j.contains("calibration_N")) cfg.calibration_n = unsigned_int(j, "calibration_N", true);
  if (j.contains("density")) {
    if (!j["density"].is_object() && !j["density"].is_array())
      throw ValidationError("density", "expected an object or a list of objects");
    cfg.density = j["density"];
  }

  if (!cfg.graph_file) {
    int n = cfg.vertices;
    for (auto& [a, b, w] : cfg.edges) n = std::max({n, a + 1, b + 1});
    if (cfg.i0 >= n) throw ValidationError("i0", "not a vertex of the graph");
    try {
      build_graph(cfg.edges, cfg.i0, cfg.vertices);
    } catch (const ValidationError&) {
      throw;
    } catch (const Error& e) {
      throw ValidationError("graph", e.what());
    }
  }
  return cfg;
}

json config_to_json(const RunConfig& cfg) {
  json j;
  if (cfg.graph_file) {
    j["graph"] = *cfg.graph_file;
  } else {
    json edges = json::array();
    for (auto& [a, b, w] : cfg.edges) edges.push_back({a, b, w});
    j["graph"] = {{"edges", edges}};
    if (cfg.vertices >= 0) j["graph"]["vertices"] = cfg.vertices;
  }
  j["i0"] = cfg.i0;
  j["sigma"] = cfg.sigma;
  j["sigma_prime"] = cfg.sigma_prime;
  j["schedule_exponent"] = cfg.schedule_exponent;
  j["N"] = cfg.n;
  j["seed"] = cfg.seed;
  j["M"] = cfg.M;
  j["alpha"] = cfg.alpha;
  j["quadrature_tolerance"] = cfg.quadrature_tolerance;
  j["threads"] = cfg.threads;
  j["out"] = cfg.out;
  j["single_window"] = cfg.single_window;
  j["sigma_list"] = cfg.sigma_list;
  j["calibration_repetitions"] = cfg.calibration_repetitions;
  j["calibration_N"] = cfg.calibration_n;
  if (!cfg.density.is_null()) j["density"] = cfg.density;
  return j;
}

std::string serialize_config(const RunConfig& cfg) { return config_to_json(cfg).dump(2); }

WeightedGraph load_graph(const RunConfig& cfg) {
  WeightedGraph g;
  try {
    if (cfg.graph_file) {
      g = read_graph_file(*cfg.graph_file);
    } else {
      g = build_graph(cfg.edges, cfg.i0, cfg.vertices);
    }
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ValidationError("graph", e.what());
  }
  if (cfg.i0 < 0 || cfg.i0 >= g.vertex_count())
    throw ValidationError("i0", "not a vertex of the graph");
  return g.root() == cfg.i0 ? g : g.with_root(cfg.i0);
}

}  // namespace vrjp
