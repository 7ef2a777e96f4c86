#pragma once

// Goodness-of-fit statistics used by the convergence harness.

#include <cstdint>
#include <functional>
#include <vector>

namespace vrjp {

// P(K > lambda) for the limiting Kolmogorov distribution.
double kolmogorov_sf(double lambda);

struct KsResult {
  double statistic = 0.0;  // sup |F_n - F|
  double p_value = 0.0;
  std::uint64_t n = 0;
};

// One-sample KS test; p-value from the asymptotic law with Stephens'
// finite-n correction lambda = (sqrt(n) + 0.12 + 0.11 / sqrt(n)) D.
KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf);

double standard_normal_cdf(double x);

struct ChiSquareResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 0.0;
  std::uint64_t n = 0;
  int cells = 0;  // after pooling
};

// Pearson test of counts against probabilities (renormalized to sum 1).
// Cells with expected count below min_expected are pooled into one.
ChiSquareResult chi_square_test(const std::vector<std::uint64_t>& counts,
                                const std::vector<double>& probabilities,
                                double min_expected = 5.0);

// Upper tail of chi-square with dof degrees of freedom.
double chi_square_sf(double x, double dof);

// CDF of a density on [a, b] tabulated on a uniform grid: each cell is
// integrated with 15-point Gauss-Kronrod, values in between use cubic
// Hermite interpolation with the density as derivative. Normalized by the
// computed total mass.
class TabulatedCdf {
 public:
  TabulatedCdf(const std::function<double(double)>& density, double a, double b,
               int nodes);
  double operator()(double x) const;
  double quantile(double p) const;
  double mass() const { return mass_; }
  double lower() const { return a_; }
  double upper() const { return b_; }

 private:
  double a_, b_, h_, mass_;
  std::vector<double> F_, f_;
};

}  // namespace vrjp
