#include "vrjp/densities.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "vrjp/errors.hpp"

namespace vrjp {

namespace {

constexpr double kPi = std::numbers::pi;

void check_field(const WeightedGraph& g, const std::vector<double>& x,
                 const char* name) {
  if (static_cast<int>(x.size()) != g.vertex_count())
    throw PreconditionViolation(std::string(name) + ": wrong length");
  if (x[g.root()] != 0.0)
    throw PreconditionViolation(std::string(name) + " must vanish at the root");
  for (double xi : x)
    if (!std::isfinite(xi))
      throw PreconditionViolation(std::string(name) + ": non-finite entry");
}

void check_tree(const WeightedGraph& g, const SpanningTree& t) {
  if (!is_spanning_tree(g, t))
    throw PreconditionViolation("edge set is not a spanning tree");
}

void check_vertex(const WeightedGraph& g, Vertex i) {
  if (i < 0 || i >= g.vertex_count())
    throw PreconditionViolation("vertex out of range");
}

void check_positive(const WeightedGraph& g, const std::vector<double>& l,
                    const char* name) {
  if (static_cast<int>(l.size()) != g.vertex_count())
    throw PreconditionViolation(std::string(name) + ": wrong length");
  for (double x : l)
    if (!(x > 0.0) || !std::isfinite(x))
      throw PreconditionViolation(std::string(name) + " must be positive");
}

// log sum_i e^{2 x_i}
double log_sum_exp2(const std::vector<double>& x) {
  const double mx = 2.0 * *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double xi : x) s += std::exp(2.0 * xi - mx);
  return mx + std::log(s);
}

// sum_E W_ij (1 - cosh(u_i - u_j) - e^{u_i + u_j} (s_i - s_j)^2 / 2)
double susy_exponent(const WeightedGraph& g, const std::vector<double>& s,
                     const std::vector<double>& u) {
  double acc = 0.0;
  for (const Edge& e : g.edges()) {
    const double ds = s[e.a] - s[e.b];
    acc += e.w * (1.0 - std::cosh(u[e.a] - u[e.b]));
    // skipped at ds = 0 so that an overflowing e^{u_i + u_j} gives -inf, not NaN
    if (ds != 0.0) acc -= 0.5 * e.w * std::exp(u[e.a] + u[e.b]) * ds * ds;
  }
  return acc;
}

double sum_except_root(const WeightedGraph& g, const std::vector<double>& x) {
  double acc = 0.0;
  for (int i = 0; i < g.vertex_count(); ++i)
    if (i != g.root()) acc += x[i];
  return acc;
}

double tree_sum(const SpanningTree& t, const std::vector<double>& per_edge) {
  double acc = 0.0;
  for (int e : t) acc += per_edge[e];
  return acc;
}

void check_integer_current(const WeightedGraph& g, const IntegerCurrent& k) {
  if (static_cast<int>(k.values.size()) != g.directed_edge_count())
    throw PreconditionViolation("current has wrong length");
  for (auto x : k.values)
    if (x < 0) throw PreconditionViolation("crossing numbers must be >= 0");
}

void check_tree_edges_crossed(const WeightedGraph& g, const IntegerCurrent& k,
                              const DirectedTree& t) {
  for (int d : t.directed_edges(g))
    if (k.values[d] < 1)
      throw PreconditionViolation("tree edge with zero crossings");
}

}  // namespace

std::vector<double> log_omega_of(const WeightedGraph& g,
                                 const std::vector<double>& x) {
  std::vector<double> out(g.edge_count());
  for (int e = 0; e < g.edge_count(); ++e) {
    const Edge& ed = g.edge(e);
    out[e] = std::log(0.5 * ed.w) + x[ed.a] + x[ed.b];
  }
  return out;
}

std::vector<double> omega_of(const WeightedGraph& g, const std::vector<double>& x) {
  std::vector<double> out = log_omega_of(g, x);
  for (double& o : out) o = std::exp(o);
  return out;
}

LogDensity mu_susy_density(const WeightedGraph& g, const std::vector<double>& s,
                           const std::vector<double>& u,
                           const SpanningTree& t_prime) {
  check_field(g, s, "s");
  check_field(g, u, "u");
  check_tree(g, t_prime);
  double lv = susy_exponent(g, s, u);
  for (int e : t_prime) {
    const Edge& ed = g.edge(e);
    lv += std::log(ed.w) + u[ed.a] + u[ed.b];
  }
  lv -= sum_except_root(g, u);
  lv -= (g.vertex_count() - 1) * std::log(2.0 * kPi);
  return {lv, 1};
}

LogDensity rho_big(const WeightedGraph& g, const CurrentVector& kappa,
                   const CurrentVector& kappa_prime,
                   const std::vector<double>& s, const std::vector<double>& v,
                   const std::vector<double>& u, Vertex i1, Vertex i1_prime,
                   const SpanningTree& t, const SpanningTree& t_prime) {
  check_field(g, s, "s");
  check_field(g, v, "v");
  check_field(g, u, "u");
  check_vertex(g, i1);
  check_vertex(g, i1_prime);
  check_tree(g, t);
  check_tree(g, t_prime);
  const int nd = g.directed_edge_count();
  if (static_cast<int>(kappa.values.size()) != nd ||
      static_cast<int>(kappa_prime.values.size()) != nd)
    throw PreconditionViolation("current has wrong length");
  const int n = g.vertex_count();
  const int m = g.edge_count();
  const auto lw = log_omega_of(g, u);

  double lv = (n - 1) * std::log(4.0) - 2.0 * m * std::log(2.0 * kPi);
  lv += susy_exponent(g, s, u);
  lv += tree_sum(t, lw) + tree_sum(t_prime, lw);
  for (double x : lw) lv -= 2.0 * x;
  for (int d = 0; d < nd; ++d) {
    const double k1 = kappa.values[d], k2 = kappa_prime.values[d];
    lv -= (k1 * k1 + k2 * k2) / (2.0 * std::exp(lw[d / 2]));
  }
  lv += 2.0 * v[i1] + 2.0 * u[i1_prime] - log_sum_exp2(v) - log_sum_exp2(u);
  lv -= sum_except_root(g, u);
  return {lv, 1};
}

LogDensity marginal_full_density(const WeightedGraph& g,
                                 const std::vector<double>& s,
                                 const std::vector<double>& u, Vertex i1,
                                 Vertex i1_prime, const SpanningTree& t,
                                 const SpanningTree& t_prime) {
  check_field(g, s, "s");
  check_field(g, u, "u");
  check_vertex(g, i1);
  check_vertex(g, i1_prime);
  check_tree(g, t);
  check_tree(g, t_prime);
  const auto lw = log_omega_of(g, u);
  double lv = -(g.vertex_count() - 1) * std::log(kPi);
  lv += susy_exponent(g, s, u);
  lv += tree_sum(t_prime, lw) + tree_sum(t, lw);
  lv -= log_tree_polynomial_from_log(g, lw);
  lv += 2.0 * u[i1] + 2.0 * u[i1_prime] - 2.0 * log_sum_exp2(u);
  lv -= sum_except_root(g, u);
  return {lv, 1};
}

namespace {

// Everything in the single-time marginal except the kappa factor.
double single_time_base(const WeightedGraph& g, const std::vector<double>& v,
                        Vertex i1, const SpanningTree& t) {
  double lv = -g.edge_count() * std::log(kPi);
  for (const Edge& e : g.edges()) lv += e.w * (1.0 - std::cosh(v[e.a] - v[e.b]));
  std::vector<char> in_tree(g.edge_count(), 0);
  for (int e : t) in_tree[e] = 1;
  for (int e = 0; e < g.edge_count(); ++e) {
    if (in_tree[e]) continue;
    const Edge& ed = g.edge(e);
    lv -= std::log(ed.w) + v[ed.a] + v[ed.b];
  }
  lv += 2.0 * v[i1] - log_sum_exp2(v);
  lv -= sum_except_root(g, v);
  return lv;
}

}  // namespace

LogDensity single_time_marginal_density(const WeightedGraph& g,
                                        const CurrentVector& kappa,
                                        const std::vector<double>& v, Vertex i1,
                                        const SpanningTree& t) {
  check_field(g, v, "v");
  check_vertex(g, i1);
  check_tree(g, t);
  if (static_cast<int>(kappa.values.size()) != g.directed_edge_count())
    throw PreconditionViolation("current has wrong length");
  double scale = 1.0;
  for (double x : kappa.values) scale = std::max(scale, std::abs(x));
  if (!check_kirchhoff(g, kappa, std::nullopt, std::nullopt, 1e-9 * scale))
    throw NotInH("kappa has nonzero divergence");
  double lv = single_time_base(g, v, i1, t);
  for (int d = 0; d < g.directed_edge_count(); ++d) {
    auto [i, j] = g.directed(d);
    const double k = kappa.values[d];
    lv -= k * k / (g.directed_weight(d) * std::exp(v[i] + v[j]));
  }
  return {lv, 1};
}

LogDensity single_time_v_density(const WeightedGraph& g,
                                 const std::vector<double>& v, Vertex i1,
                                 const SpanningTree& t) {
  check_field(g, v, "v");
  check_vertex(g, i1);
  check_tree(g, t);
  // kappa^2 / (W e^{v_i + v_j}) = kappa^2 / (2 omega_ij)
  const double lv = single_time_base(g, v, i1, t) +
                    log_gaussian_current_integral(g, log_omega_of(g, v));
  return {lv, 1};
}

LogDensity pp_factor(const WeightedGraph& g, const IntegerCurrent& k,
                     const std::vector<double>& l, const DirectedTree& t_vec) {
  check_integer_current(g, k);
  check_positive(g, l, "l");
  check_tree_edges_crossed(g, k, t_vec);
  double lv = 0.0;
  for (int d = 0; d < g.directed_edge_count(); ++d) {
    const auto kd = k.values[d];
    if (kd == 0) continue;
    const Vertex i = g.directed(d).from;
    lv += kd * std::log(0.5 * g.directed_weight(d) * l[i]) -
          std::lgamma(static_cast<double>(kd) + 1.0);
  }
  for (int d : t_vec.directed_edges(g))
    lv += std::log(static_cast<double>(k.values[d])) - std::log(l[g.directed(d).from]);
  return {lv, 1};
}

LogDensity finite_time_density(const WeightedGraph& g, const IntegerCurrent& k,
                               const IntegerCurrent& k_prime,
                               const std::vector<double>& l,
                               const std::vector<double>& l_prime, Vertex i1,
                               Vertex i1_prime, const DirectedTree& t_vec,
                               const DirectedTree& t_vec_prime) {
  check_vertex(g, i1);
  check_vertex(g, i1_prime);
  check_integer_current(g, k);
  check_integer_current(g, k_prime);
  if (k.sink != i1 || k_prime.source != i1 || k_prime.sink != i1_prime)
    throw PreconditionViolation("current endpoints do not match i1, i1'");
  if (!check_kirchhoff(g, k, k.source, k.sink) ||
      !check_kirchhoff(g, k_prime, k_prime.source, k_prime.sink))
    throw PreconditionViolation("crossing numbers violate Kirchhoff rules");
  if (!is_directed_tree_toward(g, t_vec, i1) ||
      !is_directed_tree_toward(g, t_vec_prime, i1_prime))
    throw PreconditionViolation("tree is not directed toward the endpoint");
  check_positive(g, l, "l");
  check_positive(g, l_prime, "l'");

  const int n = g.vertex_count();
  std::vector<double> big(n);
  for (int i = 0; i < n; ++i) big[i] = 1.0 + l[i] + l_prime[i];
  double lv = 0.0;
  for (const Edge& e : g.edges())
    lv += e.w * (1.0 - std::sqrt(big[e.a]) * std::sqrt(big[e.b]));
  for (int i = 0; i < n; ++i)
    if (i != i1_prime) lv -= 0.5 * std::log(big[i]);
  lv += pp_factor(g, k, l, t_vec).log_value;
  lv += pp_factor(g, k_prime, l_prime, t_vec_prime).log_value;
  return {lv, 1};
}

namespace {

using boost::multiprecision::cpp_int;

cpp_int factorial(std::int64_t x) {
  cpp_int r = 1;
  for (std::int64_t i = 2; i <= x; ++i) r *= i;
  return r;
}

}  // namespace

cpp_int path_count(const WeightedGraph& g, const IntegerCurrent& k,
                   const DirectedTree& t_vec, Vertex i0, Vertex i1) {
  check_integer_current(g, k);
  check_vertex(g, i0);
  check_vertex(g, i1);
  if (!check_kirchhoff(g, k, i0, i1))
    throw PreconditionViolation("crossing numbers violate Kirchhoff rules");
  if (!is_directed_tree_toward(g, t_vec, i1))
    throw PreconditionViolation("tree is not directed toward i1");
  const auto tree_edges = t_vec.directed_edges(g);
  for (int d : tree_edges)
    if (k.values[d] == 0) return 0;

  const int n = g.vertex_count();
  const auto kout = k.out_degrees(g);
  cpp_int tree_prod = 1;
  for (int d : tree_edges) tree_prod *= k.values[d];
  cpp_int edge_fact = 1;
  for (auto kd : k.values) edge_fact *= factorial(kd);

  // k_{i1}! prod_{i != i1} (k_i - 1)! prod_T k_ij / prod_E k_ij!
  cpp_int num = factorial(kout[i1]) * tree_prod;
  for (int i = 0; i < n; ++i)
    if (i != i1) num *= factorial(kout[i] - 1);
  if (num % edge_fact != 0)
    throw NonIntegralResult("path count is not an integer");
  cpp_int count = num / edge_fact;

  // prod_i k_i! / prod_E k_ij! * prod_T k_ij / prod_{i != i1} k_i
  cpp_int num2 = tree_prod;
  for (int i = 0; i < n; ++i) num2 *= factorial(kout[i]);
  cpp_int den2 = edge_fact;
  for (int i = 0; i < n; ++i)
    if (i != i1) den2 *= kout[i];
  if (num2 % den2 != 0 || num2 / den2 != count)
    throw NonIntegralResult("path count forms disagree");
  return count;
}

LogDensity volume_factor(const WeightedGraph& g, const IntegerCurrent& k,
                         const std::vector<double>& l, Vertex i1) {
  check_integer_current(g, k);
  check_positive(g, l, "l");
  check_vertex(g, i1);
  const auto kout = k.out_degrees(g);
  double lv = 0.0;
  for (int i = 0; i < g.vertex_count(); ++i) {
    const double ki = static_cast<double>(kout[i]);
    if (i == i1) {
      lv += ki * std::log(l[i]) - std::lgamma(ki + 1.0);
    } else {
      if (kout[i] < 1)
        throw PreconditionViolation("vertex other than i1 never departed");
      lv += (ki - 1.0) * std::log(l[i]) - std::lgamma(ki);
    }
  }
  return {lv, 1};
}

double log_gaussian_current_integral(const WeightedGraph& g,
                                     const std::vector<double>& log_omega_prime,
                                     bool squared) {
  const int n = g.vertex_count();
  const int m = g.edge_count();
  double lv = (m - n + 1) * std::log(2.0) + (m - 0.5 * (n - 1)) * std::log(kPi);
  for (double x : log_omega_prime) lv += x;
  lv -= 0.5 * log_tree_polynomial_from_log(g, log_omega_prime);
  return squared ? 2.0 * lv : lv;
}

double gaussian_current_integral(const WeightedGraph& g,
                                 const std::vector<double>& omega_prime,
                                 bool squared) {
  if (static_cast<int>(omega_prime.size()) != g.edge_count())
    throw PreconditionViolation("omega' has wrong length");
  std::vector<double> lw(omega_prime.size());
  for (std::size_t e = 0; e < lw.size(); ++e) {
    if (!(omega_prime[e] > 0.0))
      throw PreconditionViolation("omega' must be positive");
    lw[e] = std::log(omega_prime[e]);
  }
  return std::exp(log_gaussian_current_integral(g, lw, squared));
}

double s_gaussian_integral(const WeightedGraph& g,
                           const std::vector<double>& omega_prime) {
  return std::exp(0.5 * (g.vertex_count() - 1) * std::log(kPi) -
                  0.5 * std::log(tree_polynomial(g, omega_prime)));
}

LogDensity lambda_density(const WeightedGraph& g, const std::vector<double>& l,
                          const std::vector<double>& l_prime, double sigma,
                          double sigma_prime, Vertex i0) {
  check_positive(g, l, "l");
  check_positive(g, l_prime, "l'");
  check_vertex(g, i0);
  if (!(sigma > 0.0) || !(sigma_prime > 0.0))
    throw PreconditionViolation("sigma and sigma' must be positive");
  double sl = 0.0, slp = 0.0;
  for (double x : l) sl += x;
  for (double x : l_prime) slp += x;
  if (std::abs(sl - sigma) > 1e-9 * sigma ||
      std::abs(slp - sigma_prime) > 1e-9 * sigma_prime)
    throw PreconditionViolation("local times do not sum to sigma, sigma'");
  const int n = g.vertex_count();
  const int m = g.edge_count();
  const double a = std::log(l[i0]), b = std::log(l_prime[i0]);
  double lv = (1 - n) * std::log(4.0) - m * a - (m + 0.5 * (n - 1)) * b;
  lv += std::log(sigma) + std::log(sigma_prime) - a - b;
  for (int i = 0; i < n; ++i)
    if (i != i0) lv += a + b - std::log(l[i]) - std::log(l_prime[i]);
  return {lv, 1};
}

double limiting_density_ratio(const WeightedGraph& g,
                              const ObservableRecord& record, Vertex i0) {
  if (!record.in_O) throw NotInO("record is not in O");
  if (g.root() != i0)
    throw PreconditionViolation("graph root must equal i0");
  const RescaledObservables r = rescale(g, record, i0);
  const double num =
      finite_time_density(g, record.k, record.k_prime, record.l,
                          record.l_prime, record.end1, record.end2,
                          *record.tree1, *record.tree2)
          .log_value;
  const double den =
      rho_big(g, r.kappa, r.kappa_prime, r.s, r.v, r.u, r.end1, r.end2,
              r.tree1.undirected_shadow, r.tree2.undirected_shadow)
          .log_value +
      lambda_density(g, record.l, record.l_prime, record.sigma,
                     record.sigma_prime, i0)
          .log_value;
  return std::exp(num - den);
}

}  // namespace vrjp
