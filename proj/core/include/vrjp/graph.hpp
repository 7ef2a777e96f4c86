#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

namespace vrjp {

using Vertex = int;

// Undirected edge stored with a < b; (a, b) is its counting direction.
struct Edge {
  Vertex a;
  Vertex b;
  double w;
};

struct DirectedEdge {
  Vertex from;
  Vertex to;
};

// Sorted list of undirected edge indices.
using SpanningTree = std::vector<int>;

struct DirectedTree {
  Vertex root = 0;
  std::vector<Vertex> parent;  // parent[root] == -1
  SpanningTree undirected_shadow;

  // Directed edge indices (i -> parent[i]) in ascending vertex order.
  std::vector<int> directed_edges(const class WeightedGraph& g) const;
  bool operator==(const DirectedTree& o) const {
    return root == o.root && parent == o.parent;
  }
};

class WeightedGraph {
 public:
  WeightedGraph() = default;

  int vertex_count() const { return n_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  int directed_edge_count() const { return 2 * edge_count(); }
  Vertex root() const { return root_; }

  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(int e) const { return edges_[e]; }

  // Directed edge 2e is (a, b), 2e + 1 is (b, a).
  DirectedEdge directed(int d) const {
    const Edge& e = edges_[d / 2];
    return (d % 2 == 0) ? DirectedEdge{e.a, e.b} : DirectedEdge{e.b, e.a};
  }
  static int reverse(int d) { return d ^ 1; }
  int directed_index(Vertex i, Vertex j) const;  // -1 if not adjacent
  int edge_index(Vertex i, Vertex j) const;      // -1 if not adjacent
  double weight(Vertex i, Vertex j) const;       // 0 for non-edges
  double directed_weight(int d) const { return edges_[d / 2].w; }

  const std::vector<Vertex>& neighbors(Vertex i) const { return nbrs_[i]; }
  int degree(Vertex i) const { return static_cast<int>(nbrs_[i].size()); }
  int max_degree() const;

  // Spanning trees enumerated at construction when the graph has few of them.
  const std::vector<SpanningTree>* cached_trees() const {
    return trees_ ? trees_.get() : nullptr;
  }

  WeightedGraph with_root(Vertex r) const;

 private:
  friend WeightedGraph build_graph(
      const std::vector<std::tuple<int, int, double>>&, Vertex, int);
  int n_ = 0;
  Vertex root_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<Vertex>> nbrs_;
  std::vector<int> adj_;  // n*n table of directed indices, -1 for non-edges
  std::shared_ptr<const std::vector<SpanningTree>> trees_;
};

// vertex_count < 0 infers the count from the largest index.
WeightedGraph build_graph(
    const std::vector<std::tuple<int, int, double>>& edge_list,
    Vertex root = 0, int vertex_count = -1);

// Text format: '#' comments, a header line "root R", optional
// "vertices N", then one "i j W" line per edge.
WeightedGraph parse_graph_text(const std::string& text);
WeightedGraph read_graph_file(const std::string& path);
std::string format_graph_text(const WeightedGraph& g);

inline constexpr std::int64_t kTreeBudget = 1000000;

std::vector<SpanningTree> enumerate_spanning_trees(
    const WeightedGraph& g, std::int64_t budget = kTreeBudget);

// Number of spanning trees by the unweighted matrix-tree theorem.
double spanning_tree_count(const WeightedGraph& g);

Eigen::MatrixXd reduced_laplacian(const WeightedGraph& g,
                                  const std::vector<double>& omega,
                                  Vertex removed);

double tree_polynomial_enumeration(const std::vector<SpanningTree>& trees,
                                   const std::vector<double>& omega);
double log_tree_polynomial_determinant(const WeightedGraph& g,
                                       const std::vector<double>& omega);
// Sum over spanning trees of the product of omega (indexed by edge).
// Uses the cached tree list and the Laplacian cofactor and checks they agree.
double tree_polynomial(const WeightedGraph& g, const std::vector<double>& omega);
double log_tree_polynomial(const WeightedGraph& g,
                           const std::vector<double>& omega);

// Same quantity from log(omega), without the cross-check: log-sum-exp over
// the cached trees when available, otherwise a rescaled cofactor.
double log_tree_polynomial_from_log(const WeightedGraph& g,
                                    const std::vector<double>& log_omega);

DirectedTree orient_toward(const WeightedGraph& g, const SpanningTree& tree,
                           Vertex root);
std::vector<DirectedTree> directed_trees_toward(const WeightedGraph& g,
                                                Vertex i1);
bool is_spanning_tree(const WeightedGraph& g, const SpanningTree& tree);
bool is_directed_tree_toward(const WeightedGraph& g, const DirectedTree& t,
                             Vertex root);

// BFS tree from root, neighbours in ascending order, directed toward root.
DirectedTree bfs_tree(const WeightedGraph& g, Vertex root);
DirectedTree bfs_tree(const WeightedGraph& g);

struct OrientedCycle {
  int defining_edge;               // undirected index, not in the tree
  std::vector<int> directed_path;  // directed edge indices in traversal order
  // (undirected edge, +1 if traversed in counting direction else -1)
  std::vector<std::pair<int, int>> signed_edges;
};

std::vector<OrientedCycle> fundamental_cycles(const WeightedGraph& g,
                                              const DirectedTree& t0);
Eigen::MatrixXd cycle_matrix_B(const WeightedGraph& g, const DirectedTree& t0,
                               const std::vector<double>& omega_prime);

struct CurrentVector {
  std::vector<double> values;  // indexed by directed edge
  std::vector<double> divergence(const WeightedGraph& g) const;
};

struct IntegerCurrent {
  std::vector<std::int64_t> values;  // indexed by directed edge
  Vertex source = -1;
  Vertex sink = -1;
  std::vector<std::int64_t> divergence(const WeightedGraph& g) const;
  // Number of departures from each vertex.
  std::vector<std::int64_t> out_degrees(const WeightedGraph& g) const;
  bool all_positive() const;
};

bool check_kirchhoff(const WeightedGraph& g, const IntegerCurrent& k,
                     std::optional<Vertex> source, std::optional<Vertex> sink);
bool check_kirchhoff(const WeightedGraph& g, const CurrentVector& c,
                     std::optional<Vertex> source, std::optional<Vertex> sink,
                     double tol = 0.0);

// Directed edges outside the reference tree, in ascending index order.
std::vector<int> coordinate_edges(const WeightedGraph& g,
                                  const DirectedTree& t0);
std::vector<double> iota(const WeightedGraph& g, const CurrentVector& c,
                         const DirectedTree& t0, double tol = 1e-9);
CurrentVector iota_inv(const WeightedGraph& g,
                       const std::vector<double>& coords,
                       const DirectedTree& t0);
// Matrix A with kappa = A * coords for every kappa in H.
Eigen::MatrixXd iota_inv_matrix(const WeightedGraph& g,
                                const DirectedTree& t0);

std::string tree_to_string(const WeightedGraph& g, const DirectedTree& t);

}  // namespace vrjp
