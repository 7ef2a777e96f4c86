#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "vrjp/cli.hpp"
#include "vrjp/densities.hpp"
#include "vrjp/errors.hpp"

namespace vrjp {

using nlohmann::json;

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string edge_name(const WeightedGraph& g, int d) {
  auto [a, b] = g.directed(d);
  return std::to_string(a) + "_" + std::to_string(b);
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string tree_string(const WeightedGraph& g, const DirectedTree& t) {
  std::vector<std::pair<int, int>> es;
  for (int d : t.directed_edges(g)) es.push_back({g.directed(d).from, g.directed(d).to});
  std::sort(es.begin(), es.end());
  std::string out;
  for (auto [a, b] : es) {
    if (!out.empty()) out += ';';
    out += std::to_string(a) + "-" + std::to_string(b);
  }
  return out;
}

void write_observables_header(std::ostream& out, const WeightedGraph& g) {
  const int n = g.vertex_count(), nd = g.directed_edge_count();
  out << "trajectory,in_O,end1,end2";
  for (int i = 0; i < n; ++i) out << ",l_" << i;
  for (int i = 0; i < n; ++i) out << ",lp_" << i;
  for (int d = 0; d < nd; ++d) out << ",k_" << edge_name(g, d);
  for (int d = 0; d < nd; ++d) out << ",kp_" << edge_name(g, d);
  out << ",tree1,tree2";
  for (int d = 0; d < nd; ++d) out << ",kappa_" << edge_name(g, d);
  for (int d = 0; d < nd; ++d) out << ",kappap_" << edge_name(g, d);
  for (int i = 0; i < n; ++i) out << ",s_" << i;
  for (int i = 0; i < n; ++i) out << ",u_" << i;
  for (int i = 0; i < n; ++i) out << ",v_" << i;
  out << "\n";
}

void write_observables_row(std::ostream& out, const WeightedGraph& g, Vertex i0,
                           std::uint64_t index, const ObservableRecord& rec) {
  const int n = g.vertex_count(), nd = g.directed_edge_count();
  out << index << "," << (rec.in_O ? 1 : 0) << "," << rec.end1 << "," << rec.end2;
  for (double x : rec.l) out << "," << num(x);
  for (double x : rec.l_prime) out << "," << num(x);
  for (auto x : rec.k.values) out << "," << x;
  for (auto x : rec.k_prime.values) out << "," << x;
  out << "," << (rec.tree1 ? tree_string(g, *rec.tree1) : "");
  out << "," << (rec.tree2 ? tree_string(g, *rec.tree2) : "");
  if (rec.in_O) {
    const auto r = rescale(g, rec, i0);
    for (double x : r.kappa.values) out << "," << num(x);
    for (double x : r.kappa_prime.values) out << "," << num(x);
    for (double x : r.s) out << "," << num(x);
    for (double x : r.u) out << "," << num(x);
    for (double x : r.v) out << "," << num(x);
  } else {
    for (int c = 0; c < 2 * nd + 3 * n; ++c) out << ",";
  }
  out << "\n";
}

json report_to_json(const TestReport& r) {
  json j;
  j["name"] = r.name;
  j["statistic"] = std::isfinite(r.statistic) ? json(r.statistic) : json(nullptr);
  j["p_value"] = std::isnan(r.p_value) ? json(nullptr) : json(r.p_value);
  j["passed"] = r.passed;
  j["alpha"] = r.alpha;
  j["sample_size"] = r.sample_size;
  j["seed"] = r.seed;
  j["note"] = r.note;
  return j;
}

void write_reports_csv(std::ostream& out, const std::vector<TestReport>& reports) {
  out << "name,statistic,p_value,passed,alpha,sample_size,seed,note\n";
  for (const auto& r : reports)
    out << csv_quote(r.name) << "," << num(r.statistic) << ","
        << (std::isnan(r.p_value) ? "" : num(r.p_value)) << "," << (r.passed ? 1 : 0)
        << "," << num(r.alpha) << "," << r.sample_size << "," << r.seed << ","
        << csv_quote(r.note) << "\n";
}

// ---------------------------------------------------------------------------
// Density points

namespace {

struct PointReader {
  const WeightedGraph& g;
  const json& p;

  bool has(const char* k) const { return p.contains(k); }

  std::vector<double> reals(const char* k, int len) const {
    if (!p.contains(k)) throw ValidationError(k, "missing");
    const auto& a = p.at(k);
    if (!a.is_array() || static_cast<int>(a.size()) != len)
      throw ValidationError(k, "expected " + std::to_string(len) + " numbers");
    std::vector<double> out;
    for (const auto& x : a) {
      if (!x.is_number()) throw ValidationError(k, "expected numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }
  std::vector<double> field(const char* k) const { return reals(k, g.vertex_count()); }
  CurrentVector current(const char* k) const {
    CurrentVector c;
    c.values = reals(k, g.directed_edge_count());
    return c;
  }
  Vertex vertex(const char* k, std::optional<Vertex> dflt = std::nullopt) const {
    if (!p.contains(k)) {
      if (dflt) return *dflt;
      throw ValidationError(k, "missing");
    }
    const auto& x = p.at(k);
    if (!x.is_number_integer() || x.get<std::int64_t>() < 0 ||
        x.get<std::int64_t>() >= g.vertex_count())
      throw ValidationError(k, "expected a vertex index");
    return static_cast<Vertex>(x.get<std::int64_t>());
  }
  double real(const char* k) const {
    if (!p.contains(k) || !p.at(k).is_number()) throw ValidationError(k, "expected a number");
    return p.at(k).get<double>();
  }
  IntegerCurrent integer_current(const char* k, Vertex source, Vertex sink) const {
    if (!p.contains(k)) throw ValidationError(k, "missing");
    const auto& a = p.at(k);
    if (!a.is_array() || static_cast<int>(a.size()) != g.directed_edge_count())
      throw ValidationError(k, "expected one integer per directed edge");
    IntegerCurrent c;
    c.source = source;
    c.sink = sink;
    for (const auto& x : a) {
      if (!x.is_number_integer()) throw ValidationError(k, "expected integers");
      c.values.push_back(x.get<std::int64_t>());
    }
    return c;
  }
  // Undirected tree given as [[i, j], ...].
  SpanningTree tree(const char* k) const {
    if (!p.contains(k) || !p.at(k).is_array()) throw ValidationError(k, "missing");
    SpanningTree t;
    for (const auto& e : p.at(k)) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
          !e[1].is_number_integer())
        throw ValidationError(k, "edges must be [i, j]");
      const int idx = g.edge_index(e[0].get<int>(), e[1].get<int>());
      if (idx < 0) throw ValidationError(k, "not an edge of the graph");
      t.push_back(idx);
    }
    std::sort(t.begin(), t.end());
    if (!is_spanning_tree(g, t)) throw ValidationError(k, "not a spanning tree");
    return t;
  }
};

}  // namespace

void evaluate_densities(std::ostream& out, const WeightedGraph& g, const json& spec) {
  std::vector<json> blocks;
  if (spec.is_array())
    for (const auto& b : spec) blocks.push_back(b);
  else
    blocks.push_back(spec);
  out << "block,point,name,log_value,value\n";
  const Vertex i0 = g.root();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& blk = blocks[b];
    if (!blk.is_object() || !blk.contains("name") || !blk["name"].is_string() ||
        !blk.contains("points") || !blk["points"].is_array())
      throw ValidationError("density", "each block needs \"name\" and \"points\"");
    const std::string name = blk["name"].get<std::string>();
    int idx = 0;
    for (const auto& pt : blk["points"]) {
      PointReader r{g, pt};
      LogDensity d;
      std::string exact;
      if (name == "mu_susy") {
        d = mu_susy_density(g, r.field("s"), r.field("u"), r.tree("tree_prime"));
      } else if (name == "rho_big") {
        d = rho_big(g, r.current("kappa"), r.current("kappa_prime"), r.field("s"),
                    r.field("v"), r.field("u"), r.vertex("i1"), r.vertex("i1_prime"),
                    r.tree("tree"), r.tree("tree_prime"));
      } else if (name == "marginal_full") {
        d = marginal_full_density(g, r.field("s"), r.field("u"), r.vertex("i1"),
                                  r.vertex("i1_prime"), r.tree("tree"),
                                  r.tree("tree_prime"));
      } else if (name == "single_time") {
        d = single_time_marginal_density(g, r.current("kappa"), r.field("v"),
                                         r.vertex("i1"), r.tree("tree"));
      } else if (name == "single_time_v") {
        d = single_time_v_density(g, r.field("v"), r.vertex("i1"), r.tree("tree"));
      } else if (name == "pp_factor") {
        const Vertex a = r.vertex("i0", i0), b = r.vertex("i1");
        d = pp_factor(g, r.integer_current("k", a, b), r.field("l"),
                      orient_toward(g, r.tree("tree"), b));
      } else if (name == "finite_time") {
        const Vertex b = r.vertex("i1"), c = r.vertex("i1_prime");
        d = finite_time_density(g, r.integer_current("k", i0, b),
                                r.integer_current("k_prime", b, c), r.field("l"),
                                r.field("l_prime"), b, c,
                                orient_toward(g, r.tree("tree"), b),
                                orient_toward(g, r.tree("tree_prime"), c));
      } else if (name == "volume_factor") {
        const Vertex a = r.vertex("i0", i0), b = r.vertex("i1");
        d = volume_factor(g, r.integer_current("k", a, b), r.field("l"), b);
      } else if (name == "path_count") {
        const Vertex a = r.vertex("i0", i0), b = r.vertex("i1");
        const auto c = path_count(g, r.integer_current("k", a, b),
                                  orient_toward(g, r.tree("tree"), b), a, b);
        exact = c.str();
        d.log_value = c > 0 ? std::log(c.convert_to<double>()) : -INFINITY;
      } else if (name == "lambda") {
        d = lambda_density(g, r.field("l"), r.field("l_prime"), r.real("sigma"),
                           r.real("sigma_prime"), r.vertex("i0", i0));
      } else if (name == "gaussian_current_integral") {
        const auto w = r.has("omega_prime") ? r.reals("omega_prime", g.edge_count())
                                            : omega_of(g, r.field("u"));
        d.log_value = std::log(gaussian_current_integral(g, w));
      } else if (name == "tree_polynomial") {
        const auto w = r.has("omega") ? r.reals("omega", g.edge_count())
                                      : omega_of(g, r.field("u"));
        d.log_value = log_tree_polynomial(g, w);
      } else {
        throw ValidationError("density", "unknown density '" + name + "'");
      }
      out << b << "," << idx++ << "," << name << "," << num(d.log_value) << ","
          << (exact.empty() ? num(d.value()) : exact) << "\n";
    }
  }
}

}  // namespace vrjp
