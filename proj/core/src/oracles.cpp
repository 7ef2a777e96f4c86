#include "vrjp/oracles.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <queue>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <Eigen/Dense>

#include "vrjp/densities.hpp"
#include "vrjp/errors.hpp"

namespace vrjp {

// ---------------------------------------------------------------------------
// Path enumeration

PathEnumeration enumerate_paths(const WeightedGraph& g, Vertex i0, Vertex i1,
                                const IntegerCurrent& k) {
  const int n = g.vertex_count();
  const int nd = g.directed_edge_count();
  if (static_cast<int>(k.values.size()) != nd)
    throw PreconditionViolation("current has wrong length");
  std::int64_t total = 0;
  for (auto x : k.values) {
    if (x < 0) throw PreconditionViolation("crossing numbers must be >= 0");
    total += x;
  }
  if (total > kPathBudget)
    throw EnumerationBudgetExceeded("path enumeration limited to sum k <= " +
                                    std::to_string(kPathBudget));
  PathEnumeration out;
  if (!check_kirchhoff(g, k, i0, i1)) return out;

  std::vector<std::int64_t> rem = k.values;
  std::vector<int> last(n, -1);
  std::vector<std::vector<int>> out_edges(n);
  for (int d = 0; d < nd; ++d) out_edges[g.directed(d).from].push_back(d);

  auto record = [&](Vertex cur) {
    ++out.total;
    std::vector<Vertex> parent(n, -1);
    for (int i = 0; i < n; ++i) {
      if (i == cur) continue;
      if (last[i] < 0) {
        ++out.incomplete;
        return;
      }
      parent[i] = g.directed(last[i]).to;
    }
    ++out.by_tree[parent];
  };

  std::function<void(Vertex, std::int64_t)> walk = [&](Vertex cur,
                                                       std::int64_t left) {
    if (left == 0) {
      record(cur);
      return;
    }
    for (int d : out_edges[cur]) {
      if (rem[d] == 0) continue;
      --rem[d];
      const int saved = last[cur];
      last[cur] = d;
      walk(g.directed(d).to, left - 1);
      last[cur] = saved;
      ++rem[d];
    }
  };
  walk(i0, total);
  return out;
}

// ---------------------------------------------------------------------------
// Quadrature

namespace {

struct Region {
  std::vector<double> center, half;
  double value = 0.0, error = 0.0;
  int split_axis = 0;
  bool operator<(const Region& o) const { return error < o.error; }
};

using Kronrod15 = boost::math::quadrature::gauss_kronrod<double, 15>;

void rule_1d(const Integrand& f, Region& r) {
  const double a = r.center[0] - r.half[0], b = r.center[0] + r.half[0];
  double err = 0.0;
  auto g = [&](double x) { return f(std::span<const double>(&x, 1)); };
  r.value = Kronrod15::integrate(g, a, b, 0, 0.0, &err);
  r.error = err;
  r.split_axis = 0;
}

// Genz-Malik degree 7 rule with embedded degree 5 rule on a box.
class GenzMalik {
 public:
  explicit GenzMalik(int d) : d_(d) {
    const double dd = d;
    w1_ = (12824.0 - 9120.0 * dd + 400.0 * dd * dd) / 19683.0;
    w2_ = 980.0 / 6561.0;
    w3_ = (1820.0 - 400.0 * dd) / 19683.0;
    w4_ = 200.0 / 19683.0;
    w5_ = 6859.0 / 19683.0 / std::ldexp(1.0, d);
    v1_ = (729.0 - 950.0 * dd + 50.0 * dd * dd) / 729.0;
    v2_ = 245.0 / 486.0;
    v3_ = (265.0 - 100.0 * dd) / 1458.0;
    v4_ = 25.0 / 729.0;
  }
  int points() const { return 1 + 4 * d_ + 2 * d_ * (d_ - 1) + (1 << d_); }

  void apply(const Integrand& f, Region& r) const {
    const int d = d_;
    std::vector<double> x(r.center);
    auto eval = [&]() { return f(std::span<const double>(x.data(), d)); };
    const double f0 = eval();
    double s2 = 0.0, s3 = 0.0, s4 = 0.0, s5 = 0.0;
    double best = -1.0;
    int axis = 0;
    for (int i = 0; i < d; ++i) {
      x[i] = r.center[i] - kL2 * r.half[i];
      const double a = eval();
      x[i] = r.center[i] + kL2 * r.half[i];
      const double b = eval();
      x[i] = r.center[i] - kL3 * r.half[i];
      const double c = eval();
      x[i] = r.center[i] + kL3 * r.half[i];
      const double e = eval();
      x[i] = r.center[i];
      s2 += a + b;
      s3 += c + e;
      const double diff =
          std::abs(a + b - 2.0 * f0 - (kL2 * kL2) / (kL3 * kL3) * (c + e - 2.0 * f0));
      if (diff > best + 1e-14 * std::abs(best)) {
        best = diff;
        axis = i;
      }
    }
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j)
        for (int si = -1; si <= 1; si += 2)
          for (int sj = -1; sj <= 1; sj += 2) {
            x[i] = r.center[i] + si * kL4 * r.half[i];
            x[j] = r.center[j] + sj * kL4 * r.half[j];
            s4 += eval();
            x[i] = r.center[i];
            x[j] = r.center[j];
          }
    for (int mask = 0; mask < (1 << d); ++mask) {
      for (int i = 0; i < d; ++i)
        x[i] = r.center[i] + ((mask >> i) & 1 ? kL5 : -kL5) * r.half[i];
      s5 += eval();
    }
    double vol = 1.0;
    for (int i = 0; i < d; ++i) vol *= 2.0 * r.half[i];
    const double i7 = vol * (w1_ * f0 + w2_ * s2 + w3_ * s3 + w4_ * s4 + w5_ * s5);
    const double i5 = vol * (v1_ * f0 + v2_ * s2 + v3_ * s3 + v4_ * s4);
    r.value = i7;
    r.error = std::abs(i7 - i5);
    r.split_axis = axis;
  }

 private:
  static constexpr double kL2 = 0.35856858280031809;  // sqrt(9/70)
  static constexpr double kL3 = 0.94868329805051380;  // sqrt(9/10)
  static constexpr double kL4 = 0.94868329805051380;  // sqrt(9/10)
  static constexpr double kL5 = 0.68824720161168530;  // sqrt(9/19)
  int d_;
  double w1_, w2_, w3_, w4_, w5_, v1_, v2_, v3_, v4_;
};

}  // namespace

QuadratureResult quadrature(const Integrand& f, const QuadratureSpec& spec) {
  const int d = spec.dimension;
  if (d < 1 || d > 6) throw PreconditionViolation("quadrature dimension must be 1..6");
  if (static_cast<int>(spec.lower.size()) != d ||
      static_cast<int>(spec.upper.size()) != d)
    throw PreconditionViolation("quadrature bounds have wrong length");
  if (!(spec.tolerance > 0.0) && !(spec.abs_tolerance > 0.0))
    throw PreconditionViolation("quadrature tolerance must be positive");

  GenzMalik gm(d);
  const std::int64_t per_region = d == 1 ? 15 : gm.points();
  auto apply = [&](Region& r) {
    if (d == 1)
      rule_1d(f, r);
    else
      gm.apply(f, r);
  };

  Region root;
  root.center.resize(d);
  root.half.resize(d);
  for (int i = 0; i < d; ++i) {
    if (!(spec.upper[i] > spec.lower[i]))
      throw PreconditionViolation("quadrature box is empty");
    root.center[i] = 0.5 * (spec.lower[i] + spec.upper[i]);
    root.half[i] = 0.5 * (spec.upper[i] - spec.lower[i]);
  }
  apply(root);
  QuadratureResult res;
  res.evaluations = per_region;
  std::priority_queue<Region> heap;
  double value = root.value, error = root.error;
  heap.push(std::move(root));
  std::int64_t since_resum = 0;

  auto converged = [&]() {
    return error <= std::max(spec.abs_tolerance, spec.tolerance * std::abs(value));
  };
  while (!converged()) {
    if (res.evaluations + 2 * per_region > spec.max_evaluations)
      throw MaxEvaluationsExceeded(
          "quadrature: value " + std::to_string(value) + " error " +
          std::to_string(error) + " after " + std::to_string(res.evaluations) +
          " evaluations");
    Region r = heap.top();
    heap.pop();
    const int ax = r.split_axis;
    Region a = r, b = r;
    a.half[ax] *= 0.5;
    b.half[ax] *= 0.5;
    a.center[ax] -= a.half[ax];
    b.center[ax] += b.half[ax];
    apply(a);
    apply(b);
    res.evaluations += 2 * per_region;
    value += a.value + b.value - r.value;
    error += a.error + b.error - r.error;
    heap.push(std::move(a));
    heap.push(std::move(b));
    // Running sums drift; recompute them now and then.
    if (++since_resum == 1024) {
      since_resum = 0;
      std::vector<Region> all;
      all.reserve(heap.size());
      value = error = 0.0;
      while (!heap.empty()) {
        value += heap.top().value;
        error += heap.top().error;
        all.push_back(heap.top());
        heap.pop();
      }
      for (auto& x : all) heap.push(std::move(x));
    }
  }
  res.value = value;
  res.error_estimate = error;
  return res;
}

namespace {

std::vector<Vertex> free_vertices(const WeightedGraph& g) {
  std::vector<Vertex> out;
  for (int i = 0; i < g.vertex_count(); ++i)
    if (i != g.root()) out.push_back(i);
  return out;
}

}  // namespace

QuadratureResult susy_normalization(const WeightedGraph& g, double tolerance,
                                    std::int64_t max_evaluations) {
  const auto fv = free_vertices(g);
  const int m = static_cast<int>(fv.size());
  const auto trees = enumerate_spanning_trees(g);
  QuadratureSpec spec;
  spec.dimension = 2 * m;
  spec.tolerance = tolerance;
  spec.max_evaluations = max_evaluations;
  for (int i = 0; i < m; ++i) {
    spec.lower.push_back(-kFieldBox);
    spec.upper.push_back(kFieldBox);
  }
  for (int i = 0; i < m; ++i) {
    spec.lower.push_back(-kSBox);
    spec.upper.push_back(kSBox);
  }
  const int n = g.vertex_count();
  auto f = [&](std::span<const double> x) {
    std::vector<double> u(n, 0.0), s(n, 0.0);
    for (int i = 0; i < m; ++i) {
      u[fv[i]] = x[i];
      s[fv[i]] = x[m + i];
    }
    double acc = 0.0;
    for (const auto& t : trees) acc += mu_susy_density(g, s, u, t).value();
    return acc;
  };
  return quadrature(f, spec);
}

QuadratureResult gaussian_current_integral_cycle_space(
    const WeightedGraph& g, const std::vector<double>& omega_prime,
    double tolerance) {
  const int m = g.edge_count();
  const DirectedTree t0 = bfs_tree(g, g.root());
  const Eigen::MatrixXd A = iota_inv_matrix(g, t0);
  const int p = static_cast<int>(A.cols());

  std::vector<char> in_tree(m, 0);
  for (int e : t0.undirected_shadow) in_tree[e] = 1;
  // Rows: I_e for non-tree e, then J_e for every e.
  Eigen::MatrixXd L(p, p);
  int row = 0;
  const double r2 = std::sqrt(0.5);
  for (int e = 0; e < m; ++e)
    if (!in_tree[e]) L.row(row++) = r2 * (A.row(2 * e) - A.row(2 * e + 1));
  for (int e = 0; e < m; ++e) L.row(row++) = r2 * (A.row(2 * e) + A.row(2 * e + 1));
  const double det_l = std::abs(L.fullPivLu().determinant());

  QuadratureResult out;
  double value = 1.0 / det_l, rel_err = 0.0;
  for (int e = 0; e < m; ++e) {
    const double w = omega_prime[e];
    QuadratureSpec spec;
    spec.dimension = 1;
    spec.lower = {-12.0 * std::sqrt(w)};
    spec.upper = {12.0 * std::sqrt(w)};
    spec.tolerance = 0.1 * tolerance;
    auto r = quadrature(
        [w](std::span<const double> x) { return std::exp(-x[0] * x[0] / (2.0 * w)); },
        spec);
    value *= r.value;
    rel_err += r.error_estimate / r.value;
    out.evaluations += r.evaluations;
  }
  const int rank = m - g.vertex_count() + 1;
  if (rank > 0) {
    const Eigen::MatrixXd B = cycle_matrix_B(g, t0, omega_prime);
    const Eigen::MatrixXd Binv = B.inverse();
    QuadratureSpec spec;
    spec.dimension = rank;
    spec.tolerance = 0.5 * tolerance;
    for (int i = 0; i < rank; ++i) {
      const double h = 12.0 * std::sqrt(Binv(i, i));
      spec.lower.push_back(-h);
      spec.upper.push_back(h);
    }
    auto r = quadrature(
        [&](std::span<const double> x) {
          Eigen::Map<const Eigen::VectorXd> I(x.data(), rank);
          return std::exp(-0.5 * I.dot(B * I));
        },
        spec);
    value *= r.value;
    rel_err += r.error_estimate / r.value;
    out.evaluations += r.evaluations;
  }
  out.value = value;
  out.error_estimate = rel_err * value;
  return out;
}

QuadratureResult gaussian_current_integral_iota(
    const WeightedGraph& g, const std::vector<double>& omega_prime,
    double tolerance) {
  const DirectedTree t0 = bfs_tree(g, g.root());
  const Eigen::MatrixXd A = iota_inv_matrix(g, t0);
  const int p = static_cast<int>(A.cols());
  if (p > 6) throw PreconditionViolation("iota quadrature needs dimension <= 6");
  Eigen::VectorXd inv_w(A.rows());
  for (int d = 0; d < A.rows(); ++d) inv_w[d] = 1.0 / omega_prime[d / 2];
  const Eigen::MatrixXd Q = A.transpose() * inv_w.asDiagonal() * A;
  const Eigen::MatrixXd Qinv = Q.inverse();
  QuadratureSpec spec;
  spec.dimension = p;
  spec.tolerance = tolerance;
  spec.max_evaluations = 200000000;
  // 9 marginal standard deviations lose less than 1e-18 of the mass
  for (int i = 0; i < p; ++i) {
    const double h = 9.0 * std::sqrt(Qinv(i, i));
    spec.lower.push_back(-h);
    spec.upper.push_back(h);
  }
  const int rows = static_cast<int>(A.rows());
  std::vector<double> a_rows(A.size());
  for (int d = 0; d < rows; ++d)
    for (int c = 0; c < p; ++c) a_rows[d * p + c] = A(d, c);
  return quadrature(
      [&](std::span<const double> x) {
        double acc = 0.0;
        for (int d = 0; d < rows; ++d) {
          double k = 0.0;
          for (int c = 0; c < p; ++c) k += a_rows[d * p + c] * x[c];
          acc += k * k * inv_w[d];
        }
        return std::exp(-0.5 * acc);
      },
      spec);
}

double gaussian_current_integral_determinant(const WeightedGraph& g,
                                             const std::vector<double>& omega_prime) {
  const DirectedTree t0 = bfs_tree(g, g.root());
  const Eigen::MatrixXd A = iota_inv_matrix(g, t0);
  Eigen::VectorXd inv_w(A.rows());
  for (int d = 0; d < A.rows(); ++d) inv_w[d] = 1.0 / omega_prime[d / 2];
  const Eigen::MatrixXd Q = A.transpose() * inv_w.asDiagonal() * A;
  const double p = static_cast<double>(A.cols());
  return std::pow(2.0 * std::numbers::pi, 0.5 * p) / std::sqrt(Q.determinant());
}

// ---------------------------------------------------------------------------
// Monte Carlo

bool event_matches(const EventSpec& ev, const ObservableRecord& rec, Vertex i0) {
  if (rec.end1 != ev.i1 || rec.end2 != ev.i1_prime) return false;
  if (rec.k.values != ev.k.values || rec.k_prime.values != ev.k_prime.values)
    return false;
  if (!rec.tree1 || !rec.tree2) return false;
  if (!(*rec.tree1 == ev.tree) || !(*rec.tree2 == ev.tree_prime)) return false;
  for (std::size_t i = 0; i < rec.l.size(); ++i) {
    if (static_cast<Vertex>(i) == i0) continue;
    if (!(rec.l[i] >= ev.l_box[i].first && rec.l[i] <= ev.l_box[i].second))
      return false;
    if (!(rec.l_prime[i] >= ev.l_prime_box[i].first &&
          rec.l_prime[i] <= ev.l_prime_box[i].second))
      return false;
  }
  return true;
}

McEstimate mc_probability(
    const WeightedGraph& g, Vertex i0, double sigma, double sigma_prime,
    std::uint64_t n, std::uint64_t seed, int threads,
    const std::function<bool(const ObservableRecord&)>& predicate) {
  std::atomic<std::uint64_t> hits{0};
  for_each_record(g, i0, sigma, sigma_prime, seed, 0, n, threads, Engine::Auto,
                  [&](std::uint64_t, ObservableRecord&& rec) {
                    if (predicate(rec)) hits.fetch_add(1, std::memory_order_relaxed);
                  });
  McEstimate e;
  e.hits = hits.load();
  e.trials = n;
  e.estimate = static_cast<double>(e.hits) / static_cast<double>(n);
  e.stderr_ = std::sqrt(e.estimate * (1.0 - e.estimate) / static_cast<double>(n));
  return e;
}

McEstimate mc_event_probability(const WeightedGraph& g, Vertex i0,
                                const EventSpec& ev, double sigma,
                                double sigma_prime, std::uint64_t n,
                                std::uint64_t seed, int threads) {
  return mc_probability(g, i0, sigma, sigma_prime, n, seed, threads,
                        [&](const ObservableRecord& r) {
                          return event_matches(ev, r, i0);
                        });
}

QuadratureResult event_probability_quadrature(const WeightedGraph& g,
                                              const EventSpec& ev, double sigma,
                                              double sigma_prime,
                                              double tolerance) {
  const auto fv = free_vertices(g);
  const int m = static_cast<int>(fv.size());
  const int n = g.vertex_count();
  const Vertex i0 = g.root();
  QuadratureSpec spec;
  spec.dimension = 2 * m;
  spec.tolerance = tolerance;
  for (int i = 0; i < m; ++i) {
    spec.lower.push_back(ev.l_box[fv[i]].first);
    spec.upper.push_back(ev.l_box[fv[i]].second);
  }
  for (int i = 0; i < m; ++i) {
    spec.lower.push_back(ev.l_prime_box[fv[i]].first);
    spec.upper.push_back(ev.l_prime_box[fv[i]].second);
  }
  auto f = [&](std::span<const double> x) {
    std::vector<double> l(n), lp(n);
    double sl = 0.0, slp = 0.0;
    for (int i = 0; i < m; ++i) {
      l[fv[i]] = x[i];
      lp[fv[i]] = x[m + i];
      sl += x[i];
      slp += x[m + i];
    }
    l[i0] = sigma - sl;
    lp[i0] = sigma_prime - slp;
    if (!(l[i0] > 0.0) || !(lp[i0] > 0.0)) return 0.0;
    return finite_time_density(g, ev.k, ev.k_prime, l, lp, ev.i1, ev.i1_prime,
                               ev.tree, ev.tree_prime)
        .value();
  };
  return quadrature(f, spec);
}

// ---------------------------------------------------------------------------
// Jacobian

double jacobian_closed_form(const std::vector<double>& l,
                            const std::vector<double>& l_prime, double sigma,
                            double sigma_prime, Vertex i0) {
  const int n = static_cast<int>(l.size());
  const double a = l[i0], b = l_prime[i0];
  double lv = (1 - n) * std::log(4.0 * std::sqrt(a) * b);
  lv += std::log(sigma) + std::log(sigma_prime) - std::log(a) - std::log(b);
  for (int i = 0; i < n; ++i)
    if (i != i0) lv += std::log(a * b) - std::log(l[i] * l_prime[i]);
  return std::exp(lv);
}

JacobianCheck jacobian_check(const std::vector<double>& l,
                             const std::vector<double>& l_prime, double sigma,
                             double sigma_prime, Vertex i0, double step,
                             JacobianTarget target) {
  const int n = static_cast<int>(l.size());
  if (static_cast<int>(l_prime.size()) != n || i0 < 0 || i0 >= n)
    throw PreconditionViolation("jacobian_check: inconsistent sizes");
  for (int i = 0; i < n; ++i)
    if (!(l[i] >= 1e-8 * sigma) || !(l_prime[i] >= 1e-8 * sigma_prime))
      throw SingularPoint("local time too close to zero");
  std::vector<int> fv;
  for (int i = 0; i < n; ++i)
    if (i != i0) fv.push_back(i);
  const int m = n - 1;

  // x = (l_i, l'_i)_{i != i0} -> (s_i, v_i or u_i)_{i != i0}
  auto map = [&](const std::vector<double>& x) {
    std::vector<double> a(n), b(n);
    double sa = 0.0, sb = 0.0;
    for (int k = 0; k < m; ++k) {
      a[fv[k]] = x[k];
      b[fv[k]] = x[m + k];
      sa += x[k];
      sb += x[m + k];
    }
    a[i0] = sigma - sa;
    b[i0] = sigma_prime - sb;
    Eigen::VectorXd y(2 * m);
    for (int k = 0; k < m; ++k) {
      const int i = fv[k];
      const double v = 0.5 * std::log(a[i] / a[i0]);
      const double u = 0.5 * std::log(b[i] / b[i0]);
      y[k] = std::sqrt(a[i0]) * (u - v);
      y[m + k] = target == JacobianTarget::SV ? v : u;
    }
    return y;
  };

  std::vector<double> x(2 * m);
  for (int k = 0; k < m; ++k) {
    x[k] = l[fv[k]];
    x[m + k] = l_prime[fv[k]];
  }
  Eigen::MatrixXd J(2 * m, 2 * m);
  for (int c = 0; c < 2 * m; ++c) {
    const double h = step * x[c];
    auto xp = x, xm = x;
    xp[c] += h;
    xm[c] -= h;
    J.col(c) = (map(xp) - map(xm)) / (2.0 * h);
  }
  JacobianCheck out;
  out.finite_difference = std::abs(J.fullPivLu().determinant());
  out.closed_form = jacobian_closed_form(l, l_prime, sigma, sigma_prime, i0);
  out.relative_error =
      std::abs(out.finite_difference - out.closed_form) / out.closed_form;
  return out;
}

// ---------------------------------------------------------------------------
// 50-digit re-implementations

namespace {

using HP = boost::multiprecision::cpp_bin_float_50;

HP hp_pi() { return boost::math::constants::pi<HP>(); }

HP hp_log_sum_exp2(const std::vector<double>& x) {
  HP s = 0;
  for (double xi : x) s += exp(2 * HP(xi));
  return log(s);
}

HP hp_susy_exponent(const WeightedGraph& g, const std::vector<double>& s,
                    const std::vector<double>& u) {
  HP acc = 0;
  for (const Edge& e : g.edges()) {
    const HP du = HP(u[e.a]) - HP(u[e.b]);
    const HP ds = HP(s[e.a]) - HP(s[e.b]);
    acc += HP(e.w) * (1 - cosh(du) - exp(HP(u[e.a]) + HP(u[e.b])) * ds * ds / 2);
  }
  return acc;
}

HP hp_omega(const WeightedGraph& g, int e, const std::vector<double>& x) {
  const Edge& ed = g.edge(e);
  return HP(ed.w) / 2 * exp(HP(x[ed.a]) + HP(x[ed.b]));
}

}  // namespace

double hp_log_mu_susy_density(const WeightedGraph& g,
                              const std::vector<double>& s,
                              const std::vector<double>& u,
                              const SpanningTree& t_prime) {
  HP prod = 1;
  for (int e : t_prime) {
    const Edge& ed = g.edge(e);
    prod *= HP(ed.w) * exp(HP(u[ed.a]) + HP(u[ed.b]));
  }
  HP lv = hp_susy_exponent(g, s, u) + log(prod);
  for (int i = 0; i < g.vertex_count(); ++i)
    if (i != g.root()) lv += -HP(u[i]) - log(2 * hp_pi());
  return static_cast<double>(lv);
}

double hp_log_rho_big(const WeightedGraph& g, const CurrentVector& kappa,
                      const CurrentVector& kappa_prime,
                      const std::vector<double>& s, const std::vector<double>& v,
                      const std::vector<double>& u, Vertex i1, Vertex i1_prime,
                      const SpanningTree& t, const SpanningTree& t_prime) {
  const int n = g.vertex_count();
  const int m = g.edge_count();
  HP c = pow(HP(4), n - 1) / pow(2 * hp_pi(), 2 * m);
  HP prod = 1;
  for (int e : t) prod *= hp_omega(g, e, u);
  for (int e : t_prime) prod *= hp_omega(g, e, u);
  for (int e = 0; e < m; ++e) prod /= hp_omega(g, e, u) * hp_omega(g, e, u);
  HP quad = 0;
  for (int d = 0; d < g.directed_edge_count(); ++d) {
    const HP a = kappa.values[d], b = kappa_prime.values[d];
    quad += (a * a + b * b) / (2 * hp_omega(g, d / 2, u));
  }
  HP lv = log(c) + hp_susy_exponent(g, s, u) + log(prod) - quad;
  lv += 2 * HP(v[i1]) + 2 * HP(u[i1_prime]) - hp_log_sum_exp2(v) - hp_log_sum_exp2(u);
  for (int i = 0; i < n; ++i)
    if (i != g.root()) lv -= HP(u[i]);
  return static_cast<double>(lv);
}

double hp_log_pp_factor(const WeightedGraph& g, const IntegerCurrent& k,
                        const std::vector<double>& l, const DirectedTree& t_vec) {
  HP lv = 0;
  for (int d = 0; d < g.directed_edge_count(); ++d) {
    const auto kd = k.values[d];
    const DirectedEdge de = g.directed(d);
    HP lf = 0;  // log k!
    if (kd < 5000) {
      HP f = 1;
      for (std::int64_t j = 2; j <= kd; ++j) f *= j;
      lf = log(f);
    } else {
      lf = boost::math::lgamma(HP(kd) + 1);
    }
    lv += HP(kd) * log(HP(g.directed_weight(d)) * HP(l[de.from]) / 2) - lf;
  }
  for (int d : t_vec.directed_edges(g))
    lv += log(HP(k.values[d]) / HP(l[g.directed(d).from]));
  return static_cast<double>(lv);
}

double hp_log_finite_time_density(const WeightedGraph& g,
                                  const IntegerCurrent& k,
                                  const IntegerCurrent& k_prime,
                                  const std::vector<double>& l,
                                  const std::vector<double>& l_prime,
                                  Vertex i1_prime, const DirectedTree& t_vec,
                                  const DirectedTree& t_vec_prime) {
  const int n = g.vertex_count();
  HP lv = 0;
  for (const Edge& e : g.edges())
    lv += HP(e.w) * (1 - sqrt((1 + HP(l[e.a]) + HP(l_prime[e.a])) *
                              (1 + HP(l[e.b]) + HP(l_prime[e.b]))));
  for (int i = 0; i < n; ++i)
    if (i != i1_prime) lv -= log(1 + HP(l[i]) + HP(l_prime[i])) / 2;
  lv += hp_log_pp_factor(g, k, l, t_vec);
  lv += hp_log_pp_factor(g, k_prime, l_prime, t_vec_prime);
  return static_cast<double>(lv);
}

}  // namespace vrjp
