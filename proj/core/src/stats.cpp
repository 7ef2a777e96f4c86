#include "vrjp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "vrjp/errors.hpp"

namespace vrjp {

double kolmogorov_sf(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  constexpr double pi = std::numbers::pi;
  if (lambda < 1.18) {
    // 1 - sqrt(2 pi)/lambda sum_j exp(-(2j-1)^2 pi^2 / (8 lambda^2))
    const double c = -pi * pi / (8.0 * lambda * lambda);
    double s = 0.0;
    for (int j = 1; j <= 6; ++j) {
      const double t = 2.0 * j - 1.0;
      s += std::exp(c * t * t);
    }
    return std::clamp(1.0 - std::sqrt(2.0 * pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double t = std::exp(-2.0 * j * j * lambda * lambda);
    s += (j % 2 ? 2.0 : -2.0) * t;
    if (t < 1e-18) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

KsResult ks_test(std::vector<double> sample,
                 const std::function<double(double)>& cdf) {
  if (sample.empty()) throw InsufficientSamples("KS test on an empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double F = cdf(sample[i]);
    d = std::max({d, (i + 1) / n - F, F - i / n});
  }
  KsResult r;
  r.statistic = d;
  r.n = sample.size();
  const double sn = std::sqrt(n);
  r.p_value = kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
  return r;
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double chi_square_sf(double x, double dof) {
  if (!(dof > 0.0)) throw PreconditionViolation("chi-square needs dof > 0");
  if (!(x > 0.0)) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

ChiSquareResult chi_square_test(const std::vector<std::uint64_t>& counts,
                                const std::vector<double>& probabilities,
                                double min_expected) {
  if (counts.size() != probabilities.size())
    throw PreconditionViolation("counts and probabilities differ in length");
  std::uint64_t n = 0;
  double ptot = 0.0;
  for (auto c : counts) n += c;
  for (double p : probabilities) {
    if (!(p >= 0.0)) throw PreconditionViolation("negative probability");
    ptot += p;
  }
  if (n == 0) throw InsufficientSamples("chi-square test on an empty sample");
  ChiSquareResult r;
  r.n = n;
  double pooled_obs = 0.0, pooled_exp = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const double e = n * probabilities[c] / ptot;
    if (e < min_expected) {
      pooled_obs += counts[c];
      pooled_exp += e;
      continue;
    }
    r.statistic += (counts[c] - e) * (counts[c] - e) / e;
    ++r.cells;
  }
  if (pooled_exp > 0.0) {
    r.statistic += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++r.cells;
  } else if (pooled_obs > 0.0) {
    // Observed an event of probability zero.
    r.statistic = INFINITY;
    ++r.cells;
  }
  if (r.cells < 2) throw InsufficientSamples("chi-square test needs two cells");
  r.dof = r.cells - 1;
  r.p_value = std::isinf(r.statistic) ? 0.0 : chi_square_sf(r.statistic, r.dof);
  return r;
}

TabulatedCdf::TabulatedCdf(const std::function<double(double)>& density, double a,
                           double b, int nodes)
    : a_(a), b_(b) {
  if (nodes < 3 || !(b > a)) throw PreconditionViolation("bad CDF table");
  h_ = (b - a) / (nodes - 1);
  F_.assign(nodes, 0.0);
  f_.assign(nodes, 0.0);
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  for (int i = 0; i < nodes; ++i) f_[i] = density(a + i * h_);
  for (int i = 1; i < nodes; ++i) {
    const double x0 = a + (i - 1) * h_;
    F_[i] = F_[i - 1] + GK::integrate(density, x0, x0 + h_, 0, 0.0);
  }
  mass_ = F_.back();
  if (!(mass_ > 0.0)) throw PreconditionViolation("density has no mass");
  for (auto& x : F_) x /= mass_;
  for (auto& x : f_) x /= mass_;
}

double TabulatedCdf::operator()(double x) const {
  if (x <= a_) return 0.0;
  if (x >= b_) return 1.0;
  const double pos = (x - a_) / h_;
  const int i = std::min(static_cast<int>(pos), static_cast<int>(F_.size()) - 2);
  const double t = pos - i;
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  const double v = h00 * F_[i] + h10 * h_ * f_[i] + h01 * F_[i + 1] + h11 * h_ * f_[i + 1];
  return std::clamp(v, 0.0, 1.0);
}

double TabulatedCdf::quantile(double p) const {
  if (p <= 0.0) return a_;
  if (p >= 1.0) return b_;
  auto it = std::upper_bound(F_.begin(), F_.end(), p);
  int i = static_cast<int>(it - F_.begin()) - 1;
  i = std::clamp(i, 0, static_cast<int>(F_.size()) - 2);
  double lo = a_ + i * h_, hi = lo + h_;
  for (int it2 = 0; it2 < 60; ++it2) {
    const double mid = 0.5 * (lo + hi);
    if ((*this)(mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace vrjp
