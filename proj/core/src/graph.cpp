#include "vrjp/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

#include "vrjp/errors.hpp"

namespace vrjp {

namespace {

constexpr double kAutoCacheTrees = 20000;

struct UnionFind {
  std::vector<int> p;
  explicit UnionFind(int n) : p(n) { std::iota(p.begin(), p.end(), 0); }
  int find(int x) {
    while (p[x] != x) x = p[x] = p[p[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    p[a] = b;
    return true;
  }
};

}  // namespace

std::vector<int> DirectedTree::directed_edges(const WeightedGraph& g) const {
  std::vector<int> out;
  for (Vertex i = 0; i < static_cast<Vertex>(parent.size()); ++i)
    if (i != root) out.push_back(g.directed_index(i, parent[i]));
  return out;
}

int WeightedGraph::directed_index(Vertex i, Vertex j) const {
  if (i < 0 || j < 0 || i >= n_ || j >= n_) return -1;
  return adj_[static_cast<std::size_t>(i) * n_ + j];
}

int WeightedGraph::edge_index(Vertex i, Vertex j) const {
  int d = directed_index(i, j);
  return d < 0 ? -1 : d / 2;
}

double WeightedGraph::weight(Vertex i, Vertex j) const {
  int d = directed_index(i, j);
  return d < 0 ? 0.0 : edges_[d / 2].w;
}

int WeightedGraph::max_degree() const {
  int m = 0;
  for (const auto& nb : nbrs_) m = std::max<int>(m, nb.size());
  return m;
}

WeightedGraph WeightedGraph::with_root(Vertex r) const {
  if (r < 0 || r >= n_) throw InvalidGraph("root out of range");
  WeightedGraph g = *this;
  g.root_ = r;
  return g;
}

WeightedGraph build_graph(
    const std::vector<std::tuple<int, int, double>>& edge_list, Vertex root,
    int vertex_count) {
  int n = vertex_count;
  if (n < 0) {
    n = 0;
    for (const auto& [i, j, w] : edge_list) n = std::max({n, i + 1, j + 1});
  }
  if (n < 2) throw InvalidGraph("graph needs at least two vertices");
  if (root < 0 || root >= n) throw InvalidGraph("root out of range");

  std::vector<Edge> edges;
  for (const auto& [i, j, w] : edge_list) {
    if (i < 0 || j < 0 || i >= n || j >= n)
      throw InvalidGraph("vertex index out of range");
    if (i == j) throw InvalidGraph("self-loop at vertex " + std::to_string(i));
    if (!(w > 0.0) || !std::isfinite(w))
      throw InvalidWeight("weight of edge {" + std::to_string(i) + "," +
                          std::to_string(j) + "} must be positive");
    edges.push_back({std::min(i, j), std::max(i, j), w});
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
  for (std::size_t e = 1; e < edges.size(); ++e)
    if (edges[e].a == edges[e - 1].a && edges[e].b == edges[e - 1].b)
      throw DuplicateEdge("duplicate edge {" + std::to_string(edges[e].a) +
                          "," + std::to_string(edges[e].b) + "}");

  WeightedGraph g;
  g.n_ = n;
  g.root_ = root;
  g.edges_ = std::move(edges);
  g.nbrs_.assign(n, {});
  g.adj_.assign(static_cast<std::size_t>(n) * n, -1);
  UnionFind uf(n);
  int components = n;
  for (int e = 0; e < g.edge_count(); ++e) {
    const Edge& ed = g.edges_[e];
    g.adj_[static_cast<std::size_t>(ed.a) * n + ed.b] = 2 * e;
    g.adj_[static_cast<std::size_t>(ed.b) * n + ed.a] = 2 * e + 1;
    g.nbrs_[ed.a].push_back(ed.b);
    g.nbrs_[ed.b].push_back(ed.a);
    if (uf.unite(ed.a, ed.b)) --components;
  }
  if (components != 1) throw DisconnectedGraph("graph is not connected");
  for (auto& nb : g.nbrs_) std::sort(nb.begin(), nb.end());

  if (spanning_tree_count(g) <= kAutoCacheTrees)
    g.trees_ = std::make_shared<const std::vector<SpanningTree>>(
        enumerate_spanning_trees(g));
  return g;
}

WeightedGraph parse_graph_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::tuple<int, int, double>> edges;
  int root = 0;
  int n = -1;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first == "root") {
      if (!(ls >> root)) throw ParseError("expected root index", lineno, 1);
      continue;
    }
    if (first == "vertices") {
      if (!(ls >> n)) throw ParseError("expected vertex count", lineno, 1);
      continue;
    }
    std::istringstream fs(line);
    int i, j;
    double w;
    if (!(fs >> i >> j >> w))
      throw ParseError("expected 'i j W'", lineno, 1);
    std::string rest;
    if (fs >> rest) throw ParseError("trailing text", lineno, 1);
    edges.emplace_back(i, j, w);
  }
  return build_graph(edges, root, n);
}

WeightedGraph read_graph_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open graph file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_graph_text(ss.str());
}

std::string format_graph_text(const WeightedGraph& g) {
  std::ostringstream out;
  out.precision(17);
  out << "root " << g.root() << "\n";
  out << "vertices " << g.vertex_count() << "\n";
  for (const Edge& e : g.edges()) out << e.a << " " << e.b << " " << e.w << "\n";
  return out.str();
}

double spanning_tree_count(const WeightedGraph& g) {
  std::vector<double> ones(g.edge_count(), 1.0);
  return std::exp(log_tree_polynomial_determinant(g, ones));
}

std::vector<SpanningTree> enumerate_spanning_trees(const WeightedGraph& g,
                                                   std::int64_t budget) {
  const int n = g.vertex_count();
  const int m = g.edge_count();
  std::vector<SpanningTree> out;
  std::vector<int> chosen;

  // Can the chosen edges plus edges [from, m) still connect the graph?
  auto connectable = [&](int from) {
    UnionFind uf(n);
    int comps = n;
    for (int e : chosen)
      if (uf.unite(g.edge(e).a, g.edge(e).b)) --comps;
    for (int e = from; e < m && comps > 1; ++e)
      if (uf.unite(g.edge(e).a, g.edge(e).b)) --comps;
    return comps == 1;
  };

  std::function<void(int)> rec = [&](int e) {
    if (static_cast<int>(chosen.size()) == n - 1) {
      if (static_cast<std::int64_t>(out.size()) >= budget)
        throw EnumerationBudgetExceeded("more than " + std::to_string(budget) +
                                        " spanning trees");
      out.push_back(chosen);
      return;
    }
    if (e == m) return;
    // contract e
    UnionFind uf(n);
    for (int c : chosen) uf.unite(g.edge(c).a, g.edge(c).b);
    if (uf.find(g.edge(e).a) != uf.find(g.edge(e).b)) {
      chosen.push_back(e);
      rec(e + 1);
      chosen.pop_back();
    }
    // delete e
    if (connectable(e + 1)) rec(e + 1);
  };
  rec(0);
  return out;
}

Eigen::MatrixXd reduced_laplacian(const WeightedGraph& g,
                                  const std::vector<double>& omega,
                                  Vertex removed) {
  const int n = g.vertex_count();
  auto idx = [&](Vertex v) { return v < removed ? v : v - 1; };
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n - 1, n - 1);
  for (int e = 0; e < g.edge_count(); ++e) {
    const Edge& ed = g.edge(e);
    double w = omega[e];
    if (ed.a != removed) L(idx(ed.a), idx(ed.a)) += w;
    if (ed.b != removed) L(idx(ed.b), idx(ed.b)) += w;
    if (ed.a != removed && ed.b != removed) {
      L(idx(ed.a), idx(ed.b)) -= w;
      L(idx(ed.b), idx(ed.a)) -= w;
    }
  }
  return L;
}

double tree_polynomial_enumeration(const std::vector<SpanningTree>& trees,
                                   const std::vector<double>& omega) {
  double sum = 0.0;
  for (const auto& t : trees) {
    double p = 1.0;
    for (int e : t) p *= omega[e];
    sum += p;
  }
  return sum;
}

double log_tree_polynomial_determinant(const WeightedGraph& g,
                                       const std::vector<double>& omega) {
  for (double w : omega)
    if (!(w > 0.0)) throw PreconditionViolation("omega must be positive");
  Eigen::LLT<Eigen::MatrixXd> llt(reduced_laplacian(g, omega, g.root()));
  if (llt.info() != Eigen::Success)
    throw InternalInconsistency("reduced Laplacian is not positive definite");
  const auto& Lm = llt.matrixLLT();
  double s = 0.0;
  for (int i = 0; i < Lm.rows(); ++i) s += 2.0 * std::log(Lm(i, i));
  return s;
}

double log_tree_polynomial(const WeightedGraph& g,
                           const std::vector<double>& omega) {
  double det = log_tree_polynomial_determinant(g, omega);
  if (const auto* trees = g.cached_trees()) {
    double en = tree_polynomial_enumeration(*trees, omega);
    if (std::abs(std::log(en) - det) > 1e-10)
      throw InternalInconsistency(
          "tree polynomial: enumeration and cofactor disagree");
  }
  return det;
}

double log_tree_polynomial_from_log(const WeightedGraph& g,
                                    const std::vector<double>& log_omega) {
  if (const auto* trees = g.cached_trees()) {
    std::vector<double> terms;
    terms.reserve(trees->size());
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto& t : *trees) {
      double s = 0.0;
      for (int e : t) s += log_omega[e];
      terms.push_back(s);
      mx = std::max(mx, s);
    }
    double sum = 0.0;
    for (double x : terms) sum += std::exp(x - mx);
    return mx + std::log(sum);
  }
  const double c = *std::max_element(log_omega.begin(), log_omega.end());
  std::vector<double> scaled(log_omega.size());
  for (std::size_t e = 0; e < scaled.size(); ++e)
    scaled[e] = std::exp(log_omega[e] - c);
  return log_tree_polynomial_determinant(g, scaled) +
         (g.vertex_count() - 1) * c;
}

double tree_polynomial(const WeightedGraph& g, const std::vector<double>& omega) {
  return std::exp(log_tree_polynomial(g, omega));
}

bool is_spanning_tree(const WeightedGraph& g, const SpanningTree& tree) {
  if (static_cast<int>(tree.size()) != g.vertex_count() - 1) return false;
  UnionFind uf(g.vertex_count());
  for (int e : tree) {
    if (e < 0 || e >= g.edge_count()) return false;
    if (!uf.unite(g.edge(e).a, g.edge(e).b)) return false;
  }
  return true;
}

DirectedTree orient_toward(const WeightedGraph& g, const SpanningTree& tree,
                           Vertex root) {
  if (!is_spanning_tree(g, tree))
    throw PreconditionViolation("edge set is not a spanning tree");
  const int n = g.vertex_count();
  std::vector<std::vector<Vertex>> adj(n);
  for (int e : tree) {
    adj[g.edge(e).a].push_back(g.edge(e).b);
    adj[g.edge(e).b].push_back(g.edge(e).a);
  }
  DirectedTree t;
  t.root = root;
  t.parent.assign(n, -2);
  t.parent[root] = -1;
  std::queue<Vertex> q;
  q.push(root);
  while (!q.empty()) {
    Vertex v = q.front();
    q.pop();
    for (Vertex w : adj[v])
      if (t.parent[w] == -2) {
        t.parent[w] = v;
        q.push(w);
      }
  }
  t.undirected_shadow = tree;
  std::sort(t.undirected_shadow.begin(), t.undirected_shadow.end());
  return t;
}

std::vector<DirectedTree> directed_trees_toward(const WeightedGraph& g,
                                                Vertex i1) {
  std::vector<DirectedTree> out;
  if (const auto* trees = g.cached_trees()) {
    for (const auto& t : *trees) out.push_back(orient_toward(g, t, i1));
  } else {
    for (const auto& t : enumerate_spanning_trees(g))
      out.push_back(orient_toward(g, t, i1));
  }
  return out;
}

bool is_directed_tree_toward(const WeightedGraph& g, const DirectedTree& t,
                             Vertex root) {
  const int n = g.vertex_count();
  if (t.root != root || static_cast<int>(t.parent.size()) != n) return false;
  if (t.parent[root] != -1) return false;
  SpanningTree shadow;
  for (Vertex i = 0; i < n; ++i) {
    if (i == root) continue;
    int e = g.edge_index(i, t.parent[i]);
    if (e < 0) return false;
    shadow.push_back(e);
  }
  std::sort(shadow.begin(), shadow.end());
  if (!is_spanning_tree(g, shadow)) return false;
  // Spanning and every non-root vertex has one outgoing edge: following
  // parents must reach the root without cycling.
  for (Vertex i = 0; i < n; ++i) {
    Vertex v = i;
    for (int s = 0; s < n && v != root; ++s) v = t.parent[v];
    if (v != root) return false;
  }
  return shadow == t.undirected_shadow;
}

DirectedTree bfs_tree(const WeightedGraph& g, Vertex root) {
  const int n = g.vertex_count();
  std::vector<int> seen(n, 0);
  SpanningTree edges;
  std::queue<Vertex> q;
  q.push(root);
  seen[root] = 1;
  while (!q.empty()) {
    Vertex v = q.front();
    q.pop();
    for (Vertex w : g.neighbors(v))
      if (!seen[w]) {
        seen[w] = 1;
        edges.push_back(g.edge_index(v, w));
        q.push(w);
      }
  }
  return orient_toward(g, edges, root);
}

DirectedTree bfs_tree(const WeightedGraph& g) { return bfs_tree(g, g.root()); }

std::vector<OrientedCycle> fundamental_cycles(const WeightedGraph& g,
                                              const DirectedTree& t0) {
  const int n = g.vertex_count();
  std::vector<int> depth(n, 0);
  for (Vertex i = 0; i < n; ++i) {
    Vertex v = i;
    while (v != t0.root) {
      v = t0.parent[v];
      ++depth[i];
    }
  }
  std::vector<char> in_tree(g.edge_count(), 0);
  for (int e : t0.undirected_shadow) in_tree[e] = 1;

  std::vector<OrientedCycle> out;
  for (int e = 0; e < g.edge_count(); ++e) {
    if (in_tree[e]) continue;
    OrientedCycle c;
    c.defining_edge = e;
    Vertex a = g.edge(e).a, b = g.edge(e).b;
    c.directed_path.push_back(2 * e);
    // tree path b -> a: climb from both ends to the common ancestor
    std::vector<int> up, down;
    Vertex x = b, y = a;
    while (x != y) {
      if (depth[x] >= depth[y]) {
        up.push_back(g.directed_index(x, t0.parent[x]));
        x = t0.parent[x];
      } else {
        down.push_back(g.directed_index(t0.parent[y], y));
        y = t0.parent[y];
      }
    }
    c.directed_path.insert(c.directed_path.end(), up.begin(), up.end());
    c.directed_path.insert(c.directed_path.end(), down.rbegin(), down.rend());
    for (int d : c.directed_path) c.signed_edges.emplace_back(d / 2, d % 2 ? -1 : 1);
    out.push_back(std::move(c));
  }
  return out;
}

Eigen::MatrixXd cycle_matrix_B(const WeightedGraph& g, const DirectedTree& t0,
                               const std::vector<double>& omega_prime) {
  auto cycles = fundamental_cycles(g, t0);
  const int r = static_cast<int>(cycles.size());
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(r, r);
  std::vector<std::vector<int>> sign(r, std::vector<int>(g.edge_count(), 0));
  for (int c = 0; c < r; ++c)
    for (auto [e, s] : cycles[c].signed_edges) sign[c][e] = s;
  for (int c = 0; c < r; ++c)
    for (int d = 0; d < r; ++d)
      for (int e = 0; e < g.edge_count(); ++e)
        B(c, d) += sign[c][e] * sign[d][e] / omega_prime[e];
  return B;
}

std::vector<double> CurrentVector::divergence(const WeightedGraph& g) const {
  std::vector<double> div(g.vertex_count(), 0.0);
  for (int d = 0; d < g.directed_edge_count(); ++d) {
    auto [i, j] = g.directed(d);
    div[i] += values[d];
    div[j] -= values[d];
  }
  return div;
}

std::vector<std::int64_t> IntegerCurrent::divergence(
    const WeightedGraph& g) const {
  std::vector<std::int64_t> div(g.vertex_count(), 0);
  for (int d = 0; d < g.directed_edge_count(); ++d) {
    auto [i, j] = g.directed(d);
    div[i] += values[d];
    div[j] -= values[d];
  }
  return div;
}

std::vector<std::int64_t> IntegerCurrent::out_degrees(
    const WeightedGraph& g) const {
  std::vector<std::int64_t> out(g.vertex_count(), 0);
  for (int d = 0; d < g.directed_edge_count(); ++d)
    out[g.directed(d).from] += values[d];
  return out;
}

bool IntegerCurrent::all_positive() const {
  return std::all_of(values.begin(), values.end(),
                     [](std::int64_t x) { return x >= 1; });
}

bool check_kirchhoff(const WeightedGraph& g, const IntegerCurrent& k,
                     std::optional<Vertex> source, std::optional<Vertex> sink) {
  if (static_cast<int>(k.values.size()) != g.directed_edge_count()) return false;
  for (auto x : k.values)
    if (x < 0) return false;
  auto div = k.divergence(g);
  std::vector<std::int64_t> want(g.vertex_count(), 0);
  if (source) want[*source] += 1;
  if (sink) want[*sink] -= 1;
  return div == want;
}

bool check_kirchhoff(const WeightedGraph& g, const CurrentVector& c,
                     std::optional<Vertex> source, std::optional<Vertex> sink,
                     double tol) {
  if (static_cast<int>(c.values.size()) != g.directed_edge_count()) return false;
  auto div = c.divergence(g);
  if (source) div[*source] -= 1.0;
  if (sink) div[*sink] += 1.0;
  for (double x : div)
    if (std::abs(x) > tol) return false;
  return true;
}

std::vector<int> coordinate_edges(const WeightedGraph& g,
                                  const DirectedTree& t0) {
  std::vector<char> in_tree(g.directed_edge_count(), 0);
  for (int d : t0.directed_edges(g)) in_tree[d] = 1;
  std::vector<int> out;
  for (int d = 0; d < g.directed_edge_count(); ++d)
    if (!in_tree[d]) out.push_back(d);
  return out;
}

std::vector<double> iota(const WeightedGraph& g, const CurrentVector& c,
                         const DirectedTree& t0, double tol) {
  double scale = 1.0;
  for (double x : c.values) scale = std::max(scale, std::abs(x));
  if (!check_kirchhoff(g, c, std::nullopt, std::nullopt, tol * scale))
    throw NotInH("current has nonzero divergence");
  std::vector<double> out;
  for (int d : coordinate_edges(g, t0)) out.push_back(c.values[d]);
  return out;
}

CurrentVector iota_inv(const WeightedGraph& g,
                       const std::vector<double>& coords,
                       const DirectedTree& t0) {
  const int n = g.vertex_count();
  auto coord_edges = coordinate_edges(g, t0);
  if (coords.size() != coord_edges.size())
    throw PreconditionViolation("coordinate vector has wrong length");
  CurrentVector c;
  c.values.assign(g.directed_edge_count(), 0.0);
  for (std::size_t k = 0; k < coords.size(); ++k) c.values[coord_edges[k]] = coords[k];

  // Leaves first: each tree edge i -> parent(i) balances vertex i.
  std::vector<int> depth(n, 0);
  for (Vertex i = 0; i < n; ++i)
    for (Vertex v = i; v != t0.root; v = t0.parent[v]) ++depth[i];
  std::vector<Vertex> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Vertex x, Vertex y) { return depth[x] > depth[y]; });
  for (Vertex i : order) {
    if (i == t0.root) continue;
    int td = g.directed_index(i, t0.parent[i]);
    double net = 0.0;  // outflow minus inflow, excluding the tree edge
    for (Vertex j : g.neighbors(i)) {
      int out = g.directed_index(i, j);
      if (out != td) net += c.values[out];
      net -= c.values[g.directed_index(j, i)];
    }
    c.values[td] = -net;
  }
  return c;
}

Eigen::MatrixXd iota_inv_matrix(const WeightedGraph& g,
                                const DirectedTree& t0) {
  const int m = static_cast<int>(coordinate_edges(g, t0).size());
  Eigen::MatrixXd A(g.directed_edge_count(), m);
  for (int k = 0; k < m; ++k) {
    std::vector<double> unit(m, 0.0);
    unit[k] = 1.0;
    auto c = iota_inv(g, unit, t0);
    for (int d = 0; d < g.directed_edge_count(); ++d) A(d, k) = c.values[d];
  }
  return A;
}

std::string tree_to_string(const WeightedGraph& g, const DirectedTree& t) {
  (void)g;
  std::vector<std::pair<int, int>> es;
  for (Vertex i = 0; i < static_cast<Vertex>(t.parent.size()); ++i)
    if (i != t.root) es.emplace_back(i, t.parent[i]);
  std::sort(es.begin(), es.end());
  std::string s;
  for (auto [a, b] : es) {
    if (!s.empty()) s += ';';
    s += std::to_string(a) + "-" + std::to_string(b);
  }
  return s;
}

}  // namespace vrjp
