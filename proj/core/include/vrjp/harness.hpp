#pragma once

// Ensemble experiments comparing rescaled VRJP observables with the exact
// limit law: goodness-of-fit of the single-time marginals, of the s-sector
// fluctuations, and the density ratio trend along a two-scale schedule.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vrjp/graph.hpp"
#include "vrjp/rng.hpp"
#include "vrjp/simulator.hpp"
#include "vrjp/stats.hpp"

namespace vrjp {

struct EnsembleConfig {
  Vertex i0 = 0;
  double sigma = 200.0;
  double sigma_prime = 8e6;
  std::uint64_t n = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
  Engine engine = Engine::Auto;
  // Simulate only the first window [0, sigma]. Samples then carry v, kappa,
  // end1 and tree1 only, and are kept when the first window lies in Q.
  bool single_window = false;
};

struct EnsembleResult {
  EnsembleConfig config;
  // nullopt where the record is outside O (outside Q for single_window).
  std::vector<std::optional<RescaledObservables>> samples;
  std::uint64_t in_O = 0;
  std::uint64_t in_Q = 0;
  double in_O_rate = 0.0;
  double in_Q_rate = 0.0;
  // Per vertex, over accepted samples.
  std::vector<double> v_mean, v_var, u_mean, u_var, s_mean, s_var;
  // k_ij / sqrt(l_i l_j) in the first window, per directed edge.
  std::vector<double> crossing_ratio_mean, crossing_ratio_stderr;
};

EnsembleResult run_ensemble(const WeightedGraph& g, const EnsembleConfig& cfg);

struct TestReport {
  std::string name;
  double statistic = 0.0;
  double p_value = NAN;  // NaN for tests without one
  bool passed = false;
  double alpha = 0.01;   // or the tolerance for non-p-value tests
  std::uint64_t sample_size = 0;
  std::uint64_t seed = 0;
  std::string note;
};

struct HarnessOptions {
  double alpha = 0.01;
  double field_box = 12.0;
  int cdf_nodes = 0;            // 0 picks 20001 on K2, fewer on larger graphs
  double v_bin_width = 0.2;
  int min_bin_count = 20;
  double quadrature_tolerance = 1e-8;
};

// Exact reference quantities of the limit law for i0 = g.root(), computed
// lazily and cached. Not thread-safe.
class LimitLaw {
 public:
  LimitLaw(const WeightedGraph& g, HarnessOptions opt = {});

  const WeightedGraph& graph() const { return g_; }
  const HarnessOptions& options() const { return opt_; }

  // Joint density of the free v (resp. u) coordinates, v_{i0} = 0 implied.
  // Argument is a full vertex vector.
  double joint_v_density(const std::vector<double>& v) const;
  double joint_u_density(const std::vector<double>& u) const;

  const TabulatedCdf& v_marginal(Vertex i) const;
  const TabulatedCdf& u_marginal(Vertex i) const;

  // Cells (i1, undirected tree) and their probabilities, normalized to 1.
  struct Cell {
    Vertex i1;
    SpanningTree tree;  // sorted edge indices
  };
  const std::vector<Cell>& cells() const;
  const std::vector<double>& cell_probabilities() const;
  int cell_index(Vertex i1, const SpanningTree& tree) const;  // -1 if none

  // Whitening of kappa given v: z = L^T kappa_c with Q = L L^T the
  // precision of the coordinate components kappa_c.
  std::vector<double> whiten_kappa(const CurrentVector& kappa,
                                   const std::vector<double>& v) const;
  // Marginal standard deviations of s_i given u (0 at i0).
  std::vector<double> s_conditional_sd(const std::vector<double>& u) const;
  std::vector<double> whiten_s(const std::vector<double>& s,
                               const std::vector<double>& u) const;

  // Exact draw from the limit law of (kappa, kappa', v, u = v, s, i1, T) by
  // rejection for v and Gaussian draws given v. end2 and tree2 are unset.
  RescaledObservables draw(Xoshiro256pp& rng) const;
  // Draw of (i1, T) alone from cell_probabilities(); other fields empty.
  RescaledObservables draw_cell(Xoshiro256pp& rng) const;

 private:
  double marginal_density(const std::function<double(const std::vector<double>&)>& joint,
                          Vertex i, double x) const;
  int default_nodes() const;

  WeightedGraph g_;
  HarnessOptions opt_;
  std::vector<Vertex> free_;
  std::vector<SpanningTree> trees_;
  DirectedTree t0_;
  std::vector<int> coord_;
  Eigen::MatrixXd A_;  // kappa = A_ * kappa_c on H
  mutable std::map<Vertex, TabulatedCdf> v_cdf_, u_cdf_;
  mutable std::optional<std::vector<Cell>> cells_;
  mutable std::optional<std::vector<double>> cell_p_;
  mutable double draw_bound_ = 0.0;
};

std::vector<TestReport> compare_single_time(
    const std::vector<std::optional<RescaledObservables>>& samples,
    const LimitLaw& law, std::uint64_t seed);
std::vector<TestReport> compare_single_time(const EnsembleResult& ens,
                                            const LimitLaw& law);

// Requires two-scale samples.
std::vector<TestReport> compare_fluctuations(
    const std::vector<std::optional<RescaledObservables>>& samples,
    const LimitLaw& law, std::uint64_t seed);
std::vector<TestReport> compare_fluctuations(const EnsembleResult& ens,
                                             const LimitLaw& law);

// Ensemble mean of k_ij / sqrt(l_i l_j) against W_ij / 2 within 3 standard
// errors, one report per directed edge.
std::vector<TestReport> crossing_mean_reports(const EnsembleResult& ens,
                                              const WeightedGraph& g);

TestReport in_O_report(const EnsembleResult& ens, double threshold);

// ---- null calibration ----------------------------------------------------

std::vector<std::optional<RescaledObservables>> sample_limit(
    const LimitLaw& law, std::uint64_t n, std::uint64_t seed,
    bool discrete_only = false);

struct CalibrationResult {
  // Test name -> (passes, repetitions).
  std::map<std::string, std::pair<int, int>> tally;
  std::vector<std::uint64_t> seeds;
  double required_fraction = 0.95;
  bool passed() const;
};

// Runs compare_single_time (and compare_fluctuations when two_scale) on
// exact draws from the limit for each seed, tallying the tests named in
// `only` (all when empty).
CalibrationResult null_calibration(const LimitLaw& law, std::uint64_t n,
                                   const std::vector<std::uint64_t>& seeds,
                                   bool two_scale, bool discrete_only = false,
                                   const std::vector<std::string>& only = {});

// ---- density ratio along a schedule --------------------------------------

using PointSelector = std::function<ObservableRecord(
    const WeightedGraph&, Vertex, double sigma, double sigma_prime)>;

// v = u = s = 0, kappa = kappa' = 0 up to rounding of k, i1 = i1' = i0, both
// trees the BFS tree toward i0.
ObservableRecord symmetric_point(const WeightedGraph& g, Vertex i0, double sigma,
                                 double sigma_prime);

struct RatioScan {
  std::vector<double> sigmas, sigma_primes, ratios, deviations;
  double slope = 0.0;     // least squares of log|ratio - 1| on log sigma
  double fitted_c = 0.0;  // max |ratio - 1| sqrt(sigma)
  bool decreasing = false;
  TestReport report;
};

RatioScan density_ratio_scan(const WeightedGraph& g, Vertex i0,
                             const std::vector<double>& sigma_list,
                             const PointSelector& selector = symmetric_point,
                             double exponent = 3.0, double max_slope = -0.4);

}  // namespace vrjp
