#pragma once

// Slow, independent checks for the closed forms: brute-force path
// enumeration, adaptive cubature, Monte Carlo event frequencies, finite
// differences and arbitrary-precision re-evaluation.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "vrjp/graph.hpp"
#include "vrjp/simulator.hpp"

namespace vrjp {

// ---- path enumeration ----------------------------------------------------

inline constexpr std::int64_t kPathBudget = 14;

struct PathEnumeration {
  // Keyed by DirectedTree::parent of the last-exit tree.
  std::map<std::vector<Vertex>, std::uint64_t> by_tree;
  std::uint64_t incomplete = 0;  // paths whose last exits do not span
  std::uint64_t total = 0;
};

// All discrete paths from i0 crossing every directed edge exactly k times;
// they necessarily end at i1. Throws EnumerationBudgetExceeded when
// sum k > kPathBudget.
PathEnumeration enumerate_paths(const WeightedGraph& g, Vertex i0, Vertex i1,
                                const IntegerCurrent& k);

// ---- quadrature ------------------------------------------------------------

struct QuadratureSpec {
  int dimension = 1;
  std::vector<double> lower, upper;
  double tolerance = 1e-9;      // relative
  double abs_tolerance = 0.0;
  std::int64_t max_evaluations = 20000000;
};

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  std::int64_t evaluations = 0;
};

using Integrand = std::function<double(std::span<const double>)>;

// Globally adaptive: 15-point Gauss-Kronrod in one dimension, the degree 7/5
// Genz-Malik pair in 2..6 dimensions. Throws MaxEvaluationsExceeded.
QuadratureResult quadrature(const Integrand& f, const QuadratureSpec& spec);

// Box used for every field coordinate except s.
inline constexpr double kFieldBox = 12.0;
// s spreads like e^{-u/2}; [-12, 12] would drop ~4e-6 of the K2 mass.
inline constexpr double kSBox = 30.0;

// Integral of mu^susy over Omega^2 and trees.
QuadratureResult susy_normalization(const WeightedGraph& g, double tolerance,
                                    std::int64_t max_evaluations = 50000000);

// Gaussian current integral following the cycle-space route: the I/J change
// of variables (Jacobian computed numerically), the J integrals by 1-d
// quadrature and the cycle part by cubature of exp(-I^T B I / 2).
QuadratureResult gaussian_current_integral_cycle_space(
    const WeightedGraph& g, const std::vector<double>& omega_prime,
    double tolerance);

// The same integral by cubature over iota coordinates of H (dimension
// 2|E| - |V| + 1 <= 6).
QuadratureResult gaussian_current_integral_iota(
    const WeightedGraph& g, const std::vector<double>& omega_prime,
    double tolerance);

// Gaussian formula (2 pi)^{m/2} / sqrt(det Q) for Q = A^T diag(1/omega') A in
// iota coordinates.
double gaussian_current_integral_determinant(const WeightedGraph& g,
                                             const std::vector<double>& omega_prime);

// ---- Monte Carlo event probabilities --------------------------------------

struct EventSpec {
  IntegerCurrent k, k_prime;
  // Intervals for l_i and l'_i, i != i0; the entry at i0 is ignored.
  std::vector<std::pair<double, double>> l_box, l_prime_box;
  Vertex i1 = 0, i1_prime = 0;
  DirectedTree tree, tree_prime;
};

bool event_matches(const EventSpec& ev, const ObservableRecord& rec, Vertex i0);

struct McEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::uint64_t hits = 0, trials = 0;
};

McEstimate mc_event_probability(const WeightedGraph& g, Vertex i0,
                                const EventSpec& ev, double sigma,
                                double sigma_prime, std::uint64_t n,
                                std::uint64_t seed, int threads = 1);

McEstimate mc_probability(
    const WeightedGraph& g, Vertex i0, double sigma, double sigma_prime,
    std::uint64_t n, std::uint64_t seed, int threads,
    const std::function<bool(const ObservableRecord&)>& predicate);

// Integral of the finite-time joint density over the event's l-box, with
// l_{i0} = sigma - sum_{i != i0} l_i and likewise for l'.
QuadratureResult event_probability_quadrature(const WeightedGraph& g,
                                              const EventSpec& ev, double sigma,
                                              double sigma_prime,
                                              double tolerance);

// ---- Jacobian --------------------------------------------------------------

enum class JacobianTarget {
  SV,  // (l, l') -> (s, v); matches the closed form exactly
  SU,  // (l, l') -> (s, u); differs by a factor that is 1 only where u = v
};

struct JacobianCheck {
  double finite_difference = 0.0;
  double closed_form = 0.0;
  double relative_error = 0.0;
};

// (4 sqrt(l_{i0}) l'_{i0})^{1-|V|} sigma sigma' / (l_{i0} l'_{i0})
//   * prod_{i != i0} l_{i0} l'_{i0} / (l_i l'_i)
double jacobian_closed_form(const std::vector<double>& l,
                            const std::vector<double>& l_prime, double sigma,
                            double sigma_prime, Vertex i0);

// Central differences with relative step `step` in the free coordinates
// l_i, l'_i (i != i0). Throws SingularPoint when a coordinate is below
// 1e-8 sigma.
JacobianCheck jacobian_check(const std::vector<double>& l,
                             const std::vector<double>& l_prime, double sigma,
                             double sigma_prime, Vertex i0, double step = 1e-5,
                             JacobianTarget target = JacobianTarget::SV);

// ---- 50-digit re-implementations -----------------------------------------

double hp_log_mu_susy_density(const WeightedGraph& g,
                              const std::vector<double>& s,
                              const std::vector<double>& u,
                              const SpanningTree& t_prime);
double hp_log_rho_big(const WeightedGraph& g, const CurrentVector& kappa,
                      const CurrentVector& kappa_prime,
                      const std::vector<double>& s, const std::vector<double>& v,
                      const std::vector<double>& u, Vertex i1, Vertex i1_prime,
                      const SpanningTree& t, const SpanningTree& t_prime);
double hp_log_pp_factor(const WeightedGraph& g, const IntegerCurrent& k,
                        const std::vector<double>& l, const DirectedTree& t_vec);
double hp_log_finite_time_density(const WeightedGraph& g,
                                  const IntegerCurrent& k,
                                  const IntegerCurrent& k_prime,
                                  const std::vector<double>& l,
                                  const std::vector<double>& l_prime,
                                  Vertex i1_prime, const DirectedTree& t_vec,
                                  const DirectedTree& t_vec_prime);

}  // namespace vrjp
