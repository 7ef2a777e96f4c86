#pragma once

// Closed-form densities of the tree H^{2|2} model, its extended version, the
// finite-time VRJP observables and the combinatorial factors between them.
// Everything is evaluated in natural-log space. Field vectors are indexed by
// vertex and must vanish at the graph root i0 = g.root().

#include <cmath>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "vrjp/graph.hpp"
#include "vrjp/simulator.hpp"

namespace vrjp {

struct LogDensity {
  double log_value = -INFINITY;
  int sign = 1;
  double value() const { return sign * std::exp(log_value); }
};

// omega_ij = (W_ij / 2) e^{x_i + x_j} per undirected edge, and its log.
std::vector<double> omega_of(const WeightedGraph& g, const std::vector<double>& x);
std::vector<double> log_omega_of(const WeightedGraph& g,
                                 const std::vector<double>& x);

struct FieldPoint {
  std::vector<double> s, u, v;
  std::vector<double> omega(const WeightedGraph& g) const { return omega_of(g, v); }
  std::vector<double> omega_prime(const WeightedGraph& g) const {
    return omega_of(g, u);
  }
};

// Density of mu^susy w.r.t. prod_{i != i0} ds_i du_i times counting on trees.
LogDensity mu_susy_density(const WeightedGraph& g, const std::vector<double>& s,
                           const std::vector<double>& u,
                           const SpanningTree& t_prime);

// rho^big, taken verbatim including its constant 4^{|V|-1} / (2 pi)^{2|E|}.
// Reference measure: dkappa_H dkappa'_H prod ds_i du_i (v = u on the
// diagonal) times counting measures; kappa need not lie in H here.
LogDensity rho_big(const WeightedGraph& g, const CurrentVector& kappa,
                   const CurrentVector& kappa_prime,
                   const std::vector<double>& s, const std::vector<double>& v,
                   const std::vector<double>& u, Vertex i1, Vertex i1_prime,
                   const SpanningTree& t, const SpanningTree& t_prime);

// Marginal of (s, u, i1, i1', T, T') w.r.t. prod ds_i du_i and counting.
LogDensity marginal_full_density(const WeightedGraph& g,
                                 const std::vector<double>& s,
                                 const std::vector<double>& u, Vertex i1,
                                 Vertex i1_prime, const SpanningTree& t,
                                 const SpanningTree& t_prime);

// Marginal of (kappa, v, i1, T) w.r.t. dkappa_H prod dv_i and counting.
// Throws NotInH when kappa has nonzero divergence.
LogDensity single_time_marginal_density(const WeightedGraph& g,
                                        const CurrentVector& kappa,
                                        const std::vector<double>& v, Vertex i1,
                                        const SpanningTree& t);

// The same with kappa integrated out in closed form: density of (v, i1, T).
LogDensity single_time_v_density(const WeightedGraph& g,
                                 const std::vector<double>& v, Vertex i1,
                                 const SpanningTree& t);

// P(k, l, T) = prod_E (W l_i / 2)^{k_ij} / k_ij! * prod_{T} k_ij / l_i.
// Requires k >= 0 with k >= 1 on the tree edges, and l > 0.
LogDensity pp_factor(const WeightedGraph& g, const IntegerCurrent& k,
                     const std::vector<double>& l, const DirectedTree& t_vec);

// Integrand of the joint density of (k, k', l, l', i1, i1', T, T') w.r.t.
// prod_{i != i0} dl_i dl'_i, with i0 = k.source, i1 = k.sink = k'.source
// and i1' = k'.sink.
LogDensity finite_time_density(const WeightedGraph& g, const IntegerCurrent& k,
                               const IntegerCurrent& k_prime,
                               const std::vector<double>& l,
                               const std::vector<double>& l_prime, Vertex i1,
                               Vertex i1_prime, const DirectedTree& t_vec,
                               const DirectedTree& t_vec_prime);

// Number of discrete paths i0 -> i1 with crossing numbers k and last-exit
// tree t_vec. Zero when some tree edge is never crossed.
boost::multiprecision::cpp_int path_count(const WeightedGraph& g,
                                          const IntegerCurrent& k,
                                          const DirectedTree& t_vec, Vertex i0,
                                          Vertex i1);

// V(k, l, i1) = l_{i1}^{k_{i1}} / k_{i1}! prod_{i != i1} l_i^{k_i - 1} / (k_i - 1)!
// with k_i the number of departures from i.
LogDensity volume_factor(const WeightedGraph& g, const IntegerCurrent& k,
                         const std::vector<double>& l, Vertex i1);

// Integral over H of exp(-sum_E kappa^2 / (2 omega'_ij)) d kappa_H; squared
// gives the integral over H^2 of the two-current version.
double log_gaussian_current_integral(const WeightedGraph& g,
                                     const std::vector<double>& log_omega_prime,
                                     bool squared = false);
double gaussian_current_integral(const WeightedGraph& g,
                                 const std::vector<double>& omega_prime,
                                 bool squared = false);

// Integral over Omega_{i0} of exp(-sum_E omega'_ij (s_i - s_j)^2) prod ds_i.
double s_gaussian_integral(const WeightedGraph& g,
                           const std::vector<double>& omega_prime);

// Density of Lambda_{sigma, sigma', i0} w.r.t. prod_{i != i0} dl_i dl'_i.
LogDensity lambda_density(const WeightedGraph& g, const std::vector<double>& l,
                          const std::vector<double>& l_prime, double sigma,
                          double sigma_prime, Vertex i0);

// finite_time_density / (rho^big(F(record)) * lambda_density), which tends to
// 1 as min(sigma, sigma' / sigma^2) grows. Requires record.in_O.
double limiting_density_ratio(const WeightedGraph& g,
                              const ObservableRecord& record, Vertex i0);

}  // namespace vrjp
