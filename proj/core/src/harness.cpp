#include "vrjp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "vrjp/densities.hpp"
#include "vrjp/errors.hpp"
#include "vrjp/oracles.hpp"

namespace vrjp {

namespace {

constexpr std::uint32_t kNullPurpose = 7;
constexpr double kDrawBox = 8.0;

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

bool first_window_in_Q(const ObservableRecord& rec) {
  if (!rec.tree1) return false;
  for (double x : rec.l)
    if (!(x > 0.0)) return false;
  return true;
}

RescaledObservables rescale_first_window(const WeightedGraph& g,
                                         const ObservableRecord& rec, Vertex i0) {
  const int n = g.vertex_count();
  RescaledObservables r;
  r.v.assign(n, 0.0);
  const double l0 = rec.l[i0], sq0 = std::sqrt(l0);
  for (int i = 0; i < n; ++i)
    if (i != i0) r.v[i] = 0.5 * std::log(rec.l[i] / l0);
  const int nd = g.directed_edge_count();
  r.kappa.values.resize(nd);
  for (int d = 0; d < nd; ++d) {
    auto [i, j] = g.directed(d);
    r.kappa.values[d] =
        (rec.k.values[d] - 0.5 * g.directed_weight(d) * std::sqrt(rec.l[i] * rec.l[j])) /
        sq0;
  }
  r.end1 = rec.end1;
  r.tree1 = *rec.tree1;
  return r;
}

// Two-sided p-value of a chi-square statistic: too small is as suspicious
// as too large when testing a variance.
double two_sided_chi2(double x, double dof) {
  const double sf = chi_square_sf(x, dof);
  return std::min(1.0, 2.0 * std::min(sf, 1.0 - sf));
}

std::vector<const RescaledObservables*> accepted(
    const std::vector<std::optional<RescaledObservables>>& samples) {
  std::vector<const RescaledObservables*> out;
  for (const auto& s : samples)
    if (s) out.push_back(&*s);
  if (out.empty()) throw InsufficientSamples("no samples inside O / Q");
  return out;
}

std::vector<double> omega_vec(const WeightedGraph& g, const std::vector<double>& x) {
  return omega_of(g, x);
}

}  // namespace

// ---------------------------------------------------------------------------

EnsembleResult run_ensemble(const WeightedGraph& g, const EnsembleConfig& cfg) {
  if (cfg.n < 1000) throw PreconditionViolation("run_ensemble needs N >= 1000");
  if (cfg.i0 < 0 || cfg.i0 >= g.vertex_count())
    throw PreconditionViolation("i0 out of range");
  EnsembleResult res;
  res.config = cfg;
  res.samples.resize(cfg.n);
  const int n = g.vertex_count();
  const int nd = g.directed_edge_count();
  // A vanishing second window; only the first one is looked at.
  const double sp = cfg.single_window ? 1e-9 * cfg.sigma : cfg.sigma_prime;
  std::vector<std::vector<double>> ratios(cfg.n);
  std::vector<char> in_O(cfg.n, 0), in_Q(cfg.n, 0);
  for_each_record(g, cfg.i0, cfg.sigma, sp, cfg.seed, 0, cfg.n, cfg.threads,
                  cfg.engine, [&](std::uint64_t idx, ObservableRecord&& rec) {
                    in_O[idx] = rec.in_O;
                    in_Q[idx] = first_window_in_Q(rec);
                    if (in_Q[idx]) {
                      auto& r = ratios[idx];
                      r.resize(nd);
                      for (int d = 0; d < nd; ++d) {
                        auto [i, j] = g.directed(d);
                        r[d] = rec.k.values[d] / std::sqrt(rec.l[i] * rec.l[j]);
                      }
                    }
                    if (cfg.single_window) {
                      if (in_Q[idx])
                        res.samples[idx] = rescale_first_window(g, rec, cfg.i0);
                    } else if (rec.in_O) {
                      res.samples[idx] = rescale(g, rec, cfg.i0);
                    }
                  });
  for (std::uint64_t i = 0; i < cfg.n; ++i) {
    res.in_O += in_O[i];
    res.in_Q += in_Q[i];
  }
  res.in_O_rate = static_cast<double>(res.in_O) / cfg.n;
  res.in_Q_rate = static_cast<double>(res.in_Q) / cfg.n;

  res.crossing_ratio_mean.assign(nd, 0.0);
  res.crossing_ratio_stderr.assign(nd, 0.0);
  std::vector<double> sq(nd, 0.0);
  for (const auto& r : ratios)
    for (int d = 0; d < static_cast<int>(r.size()); ++d) {
      res.crossing_ratio_mean[d] += r[d];
      sq[d] += r[d] * r[d];
    }
  if (res.in_Q > 1)
    for (int d = 0; d < nd; ++d) {
      const double m = res.crossing_ratio_mean[d] / res.in_Q;
      const double var = (sq[d] / res.in_Q - m * m) * res.in_Q / (res.in_Q - 1);
      res.crossing_ratio_mean[d] = m;
      res.crossing_ratio_stderr[d] = std::sqrt(std::max(var, 0.0) / res.in_Q);
    }

  auto moments = [&](auto field, std::vector<double>& mean, std::vector<double>& var) {
    mean.assign(n, 0.0);
    var.assign(n, 0.0);
    std::uint64_t cnt = 0;
    for (const auto& s : res.samples) {
      if (!s) continue;
      const auto& x = field(*s);
      if (x.empty()) return;
      ++cnt;
      for (int i = 0; i < n; ++i) {
        mean[i] += x[i];
        var[i] += x[i] * x[i];
      }
    }
    if (cnt < 2) return;
    for (int i = 0; i < n; ++i) {
      mean[i] /= cnt;
      var[i] = (var[i] / cnt - mean[i] * mean[i]) * cnt / (cnt - 1);
    }
  };
  moments([](const RescaledObservables& r) -> const auto& { return r.v; }, res.v_mean,
          res.v_var);
  if (!cfg.single_window) {
    moments([](const RescaledObservables& r) -> const auto& { return r.u; },
            res.u_mean, res.u_var);
    moments([](const RescaledObservables& r) -> const auto& { return r.s; },
            res.s_mean, res.s_var);
  }
  return res;
}

// ---------------------------------------------------------------------------

LimitLaw::LimitLaw(const WeightedGraph& g, HarnessOptions opt) : g_(g), opt_(opt) {
  for (int i = 0; i < g_.vertex_count(); ++i)
    if (i != g_.root()) free_.push_back(i);
  if (free_.empty() || free_.size() > 6)
    throw PreconditionViolation("limit law comparisons need 2..7 vertices");
  trees_ = enumerate_spanning_trees(g_);
  t0_ = bfs_tree(g_, g_.root());
  coord_ = coordinate_edges(g_, t0_);
  A_ = iota_inv_matrix(g_, t0_);
}

double LimitLaw::joint_v_density(const std::vector<double>& v) const {
  double acc = 0.0;
  for (Vertex i1 = 0; i1 < g_.vertex_count(); ++i1)
    for (const auto& t : trees_) acc += single_time_v_density(g_, v, i1, t).value();
  return acc;
}

double LimitLaw::joint_u_density(const std::vector<double>& u) const {
  // mu^susy with s integrated out: the s-part is Gaussian with precision
  // 2 L(omega'), and sum_T' prod W e^{u_i + u_j} = 2^{|V|-1} sum_T' prod omega'.
  const double m = static_cast<double>(free_.size());
  double lv = 0.0;
  for (const Edge& e : g_.edges()) lv += e.w * (1.0 - std::cosh(u[e.a] - u[e.b]));
  const double ltp = log_tree_polynomial_from_log(g_, log_omega_of(g_, u));
  lv += m * std::log(2.0) + ltp;
  for (Vertex i : free_) lv -= u[i];
  lv -= m * std::log(2.0 * std::numbers::pi);
  lv += 0.5 * m * std::log(std::numbers::pi) - 0.5 * ltp;
  return std::exp(lv);
}

double LimitLaw::marginal_density(
    const std::function<double(const std::vector<double>&)>& joint, Vertex i,
    double x) const {
  std::vector<double> full(g_.vertex_count(), 0.0);
  full[i] = x;
  std::vector<Vertex> rest;
  for (Vertex j : free_)
    if (j != i) rest.push_back(j);
  if (rest.empty()) return joint(full);
  QuadratureSpec spec;
  spec.dimension = static_cast<int>(rest.size());
  spec.lower.assign(rest.size(), -opt_.field_box);
  spec.upper.assign(rest.size(), opt_.field_box);
  spec.tolerance = opt_.quadrature_tolerance;
  spec.abs_tolerance = 1e-14;
  return quadrature(
             [&](std::span<const double> y) {
               auto f = full;
               for (std::size_t k = 0; k < rest.size(); ++k) f[rest[k]] = y[k];
               return joint(f);
             },
             spec)
      .value;
}

int LimitLaw::default_nodes() const {
  if (opt_.cdf_nodes > 0) return opt_.cdf_nodes;
  switch (free_.size()) {
    case 1: return 20001;
    case 2: return 1201;
    default: return 201;
  }
}

const TabulatedCdf& LimitLaw::v_marginal(Vertex i) const {
  if (i == g_.root() || i < 0 || i >= g_.vertex_count())
    throw PreconditionViolation("marginal requested at i0 or out of range");
  auto it = v_cdf_.find(i);
  if (it != v_cdf_.end()) return it->second;
  auto joint = [this](const std::vector<double>& v) { return joint_v_density(v); };
  return v_cdf_
      .emplace(i, TabulatedCdf([&](double x) { return marginal_density(joint, i, x); },
                               -opt_.field_box, opt_.field_box, default_nodes()))
      .first->second;
}

const TabulatedCdf& LimitLaw::u_marginal(Vertex i) const {
  if (i == g_.root() || i < 0 || i >= g_.vertex_count())
    throw PreconditionViolation("marginal requested at i0 or out of range");
  auto it = u_cdf_.find(i);
  if (it != u_cdf_.end()) return it->second;
  auto joint = [this](const std::vector<double>& u) { return joint_u_density(u); };
  return u_cdf_
      .emplace(i, TabulatedCdf([&](double x) { return marginal_density(joint, i, x); },
                               -opt_.field_box, opt_.field_box, default_nodes()))
      .first->second;
}

const std::vector<LimitLaw::Cell>& LimitLaw::cells() const {
  if (!cells_) {
    std::vector<Cell> c;
    for (Vertex i1 = 0; i1 < g_.vertex_count(); ++i1)
      for (const auto& t : trees_) c.push_back({i1, t});
    cells_ = std::move(c);
  }
  return *cells_;
}

const std::vector<double>& LimitLaw::cell_probabilities() const {
  if (cell_p_) return *cell_p_;
  const auto& cs = cells();
  std::vector<double> p;
  const int n = g_.vertex_count();
  const int m = static_cast<int>(free_.size());
  double tot = 0.0;
  for (const auto& c : cs) {
    QuadratureSpec spec;
    spec.dimension = m;
    spec.lower.assign(m, -opt_.field_box);
    spec.upper.assign(m, opt_.field_box);
    spec.tolerance = std::max(opt_.quadrature_tolerance, 1e-7);
    spec.max_evaluations = 100000000;
    auto r = quadrature(
        [&](std::span<const double> x) {
          std::vector<double> v(n, 0.0);
          for (int k = 0; k < m; ++k) v[free_[k]] = x[k];
          return single_time_v_density(g_, v, c.i1, c.tree).value();
        },
        spec);
    p.push_back(r.value);
    tot += r.value;
  }
  for (auto& x : p) x /= tot;
  cell_p_ = std::move(p);
  return *cell_p_;
}

int LimitLaw::cell_index(Vertex i1, const SpanningTree& tree) const {
  SpanningTree t = tree;
  std::sort(t.begin(), t.end());
  const auto& cs = cells();
  for (std::size_t k = 0; k < cs.size(); ++k)
    if (cs[k].i1 == i1 && cs[k].tree == t) return static_cast<int>(k);
  return -1;
}

namespace {

Eigen::MatrixXd current_precision(const Eigen::MatrixXd& A,
                                  const std::vector<double>& omega) {
  Eigen::VectorXd inv(A.rows());
  for (int d = 0; d < A.rows(); ++d) inv[d] = 1.0 / omega[d / 2];
  return A.transpose() * inv.asDiagonal() * A;
}

}  // namespace

std::vector<double> LimitLaw::whiten_kappa(const CurrentVector& kappa,
                                           const std::vector<double>& v) const {
  const Eigen::LLT<Eigen::MatrixXd> llt(current_precision(A_, omega_vec(g_, v)));
  Eigen::VectorXd x(coord_.size());
  for (std::size_t c = 0; c < coord_.size(); ++c) x[c] = kappa.values[coord_[c]];
  const Eigen::VectorXd z = llt.matrixU() * x;
  return {z.data(), z.data() + z.size()};
}

std::vector<double> LimitLaw::s_conditional_sd(const std::vector<double>& u) const {
  const Eigen::MatrixXd P = 2.0 * reduced_laplacian(g_, omega_vec(g_, u), g_.root());
  const Eigen::MatrixXd C = P.inverse();
  std::vector<double> sd(g_.vertex_count(), 0.0);
  for (std::size_t k = 0; k < free_.size(); ++k) sd[free_[k]] = std::sqrt(C(k, k));
  return sd;
}

std::vector<double> LimitLaw::whiten_s(const std::vector<double>& s,
                                       const std::vector<double>& u) const {
  const Eigen::LLT<Eigen::MatrixXd> llt(
      2.0 * reduced_laplacian(g_, omega_vec(g_, u), g_.root()));
  Eigen::VectorXd x(free_.size());
  for (std::size_t k = 0; k < free_.size(); ++k) x[k] = s[free_[k]];
  const Eigen::VectorXd z = llt.matrixU() * x;
  return {z.data(), z.data() + z.size()};
}

RescaledObservables LimitLaw::draw(Xoshiro256pp& rng) const {
  const int n = g_.vertex_count();
  const int m = static_cast<int>(free_.size());
  std::uniform_real_distribution<double> box(-kDrawBox, kDrawBox);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  if (draw_bound_ == 0.0) {
    int per = std::max(5, static_cast<int>(std::pow(2e4, 1.0 / m)));
    std::vector<int> idx(m, 0);
    double mx = 0.0;
    std::vector<double> v(n, 0.0);
    while (true) {
      for (int k = 0; k < m; ++k)
        v[free_[k]] = -kDrawBox + 2.0 * kDrawBox * idx[k] / (per - 1);
      mx = std::max(mx, joint_v_density(v));
      int k = 0;
      while (k < m && ++idx[k] == per) idx[k++] = 0;
      if (k == m) break;
    }
    draw_bound_ = 2.0 * mx;
  }
  RescaledObservables r;
  r.v.assign(n, 0.0);
  while (true) {
    for (Vertex i : free_) r.v[i] = box(rng);
    const double f = joint_v_density(r.v);
    if (f > draw_bound_)
      throw InternalInconsistency("rejection bound exceeded in limit draw");
    if (unit(rng) * draw_bound_ < f) break;
  }
  // (i1, T) given v.
  std::vector<double> w;
  std::vector<std::pair<Vertex, const SpanningTree*>> cell;
  for (Vertex i1 = 0; i1 < n; ++i1)
    for (const auto& t : trees_) {
      w.push_back(single_time_v_density(g_, r.v, i1, t).value());
      cell.push_back({i1, &t});
    }
  std::discrete_distribution<int> pick(w.begin(), w.end());
  const int c = pick(rng);
  r.end1 = cell[c].first;
  r.tree1 = orient_toward(g_, *cell[c].second, r.end1);

  // Gaussian sectors given v (= u).
  const auto omega = omega_vec(g_, r.v);
  auto gaussian_current = [&]() {
    const Eigen::LLT<Eigen::MatrixXd> llt(current_precision(A_, omega));
    Eigen::VectorXd xi(coord_.size());
    for (int k = 0; k < xi.size(); ++k) xi[k] = normal(rng);
    const Eigen::VectorXd x = llt.matrixU().solve(xi);
    const Eigen::VectorXd kap = A_ * x;
    CurrentVector out;
    out.values.assign(kap.data(), kap.data() + kap.size());
    return out;
  };
  r.kappa = gaussian_current();
  r.kappa_prime = gaussian_current();
  r.u = r.v;
  const Eigen::LLT<Eigen::MatrixXd> llt(2.0 * reduced_laplacian(g_, omega, g_.root()));
  Eigen::VectorXd xi(m);
  for (int k = 0; k < m; ++k) xi[k] = normal(rng);
  const Eigen::VectorXd s = llt.matrixU().solve(xi);
  r.s.assign(n, 0.0);
  for (int k = 0; k < m; ++k) r.s[free_[k]] = s[k];
  return r;
}

RescaledObservables LimitLaw::draw_cell(Xoshiro256pp& rng) const {
  const auto& p = cell_probabilities();
  std::discrete_distribution<int> pick(p.begin(), p.end());
  const auto& c = cells()[pick(rng)];
  RescaledObservables r;
  r.end1 = c.i1;
  r.tree1 = orient_toward(g_, c.tree, c.i1);
  return r;
}

// ---------------------------------------------------------------------------

std::vector<TestReport> compare_single_time(
    const std::vector<std::optional<RescaledObservables>>& samples,
    const LimitLaw& law, std::uint64_t seed) {
  const auto acc = accepted(samples);
  const auto& g = law.graph();
  const double alpha = law.options().alpha;
  std::vector<TestReport> out;
  const bool have_v = !acc.front()->v.empty();

  if (have_v)
    for (Vertex i = 0; i < g.vertex_count(); ++i) {
      if (i == g.root()) continue;
      std::vector<double> x;
      x.reserve(acc.size());
      for (auto* s : acc) x.push_back(s->v[i]);
      const auto& F = law.v_marginal(i);
      const auto ks = ks_test(std::move(x), [&F](double y) { return F(y); });
      out.push_back({"ks_v" + std::to_string(i), ks.statistic, ks.p_value,
                     ks.p_value > alpha, alpha, ks.n, seed,
                     "marginal mass on box " + fmt(F.mass())});
    }

  {
    std::vector<std::uint64_t> counts(law.cells().size(), 0);
    for (auto* s : acc) {
      const int c = law.cell_index(s->end1, s->tree1.undirected_shadow);
      if (c < 0) throw InternalInconsistency("sample tree is not spanning");
      ++counts[c];
    }
    const auto chi = chi_square_test(counts, law.cell_probabilities());
    out.push_back({"chi2_endpoint_tree", chi.statistic, chi.p_value,
                   chi.p_value > alpha, alpha, chi.n, seed,
                   std::to_string(chi.cells) + " cells, dof " + fmt(chi.dof)});
  }

  if (have_v && !acc.front()->kappa.values.empty()) {
    const double w = law.options().v_bin_width;
    std::map<std::vector<long>, std::pair<std::vector<double>, std::pair<double, std::uint64_t>>>
        bins;  // key -> (sum z, (sum |z|^2, count))
    double total = 0.0;
    std::size_t p = 0;
    for (auto* s : acc) {
      const auto z = law.whiten_kappa(s->kappa, s->v);
      p = z.size();
      std::vector<long> key;
      for (Vertex i = 0; i < g.vertex_count(); ++i)
        if (i != g.root()) key.push_back(static_cast<long>(std::floor(s->v[i] / w)));
      auto& b = bins[key];
      if (b.first.empty()) b.first.assign(p, 0.0);
      double z2 = 0.0;
      for (std::size_t k = 0; k < p; ++k) {
        b.first[k] += z[k];
        z2 += z[k] * z[k];
      }
      b.second.first += z2;
      ++b.second.second;
      total += z2;
    }
    const double dof = static_cast<double>(p * acc.size());
    const double pt = two_sided_chi2(total, dof);
    out.push_back({"kappa_chi2_total", total / dof, pt, pt > alpha, alpha, acc.size(),
                   seed, "mean |z|^2 per component, expected 1"});
    double means = 0.0, vars = 0.0;
    int nb = 0;
    for (const auto& [key, b] : bins) {
      const auto cnt = b.second.second;
      if (cnt < static_cast<std::uint64_t>(law.options().min_bin_count)) continue;
      ++nb;
      for (double sz : b.first) means += sz * sz / cnt;
      const double e = static_cast<double>(p * cnt);
      vars += (b.second.first - e) * (b.second.first - e) / (2.0 * e);
    }
    if (nb > 0) {
      const double pm = chi_square_sf(means, static_cast<double>(p * nb));
      out.push_back({"kappa_bin_means", means, pm, pm > alpha, alpha, acc.size(), seed,
                     std::to_string(nb) + " v-bins"});
      const double pv = chi_square_sf(vars, nb);
      out.push_back({"kappa_bin_variances", vars, pv, pv > alpha, alpha, acc.size(),
                     seed, "normal approximation per bin"});
    }
  }
  return out;
}

std::vector<TestReport> compare_single_time(const EnsembleResult& ens,
                                            const LimitLaw& law) {
  return compare_single_time(ens.samples, law, ens.config.seed);
}

std::vector<TestReport> compare_fluctuations(
    const std::vector<std::optional<RescaledObservables>>& samples,
    const LimitLaw& law, std::uint64_t seed) {
  const auto acc = accepted(samples);
  if (acc.front()->s.empty() || acc.front()->u.empty())
    throw PreconditionViolation("fluctuation tests need two-scale samples");
  const auto& g = law.graph();
  const double alpha = law.options().alpha;
  const int n = g.vertex_count();
  std::vector<TestReport> out;

  std::vector<std::vector<double>> stdz(n);
  std::vector<std::vector<double>> near0(n);
  double total = 0.0;
  std::size_t p = 0;
  const double w = law.options().v_bin_width;
  std::map<std::vector<long>, std::pair<double, std::uint64_t>> bins;
  for (auto* s : acc) {
    const auto sd = law.s_conditional_sd(s->u);
    bool small_u = true;
    for (Vertex i = 0; i < n; ++i)
      if (i != g.root() && std::abs(s->u[i]) >= 0.1) small_u = false;
    for (Vertex i = 0; i < n; ++i) {
      if (i == g.root()) continue;
      stdz[i].push_back(s->s[i] / sd[i]);
      if (small_u) near0[i].push_back(s->s[i] / sd[i]);
    }
    const auto z = law.whiten_s(s->s, s->u);
    p = z.size();
    double z2 = 0.0;
    for (double x : z) z2 += x * x;
    total += z2;
    std::vector<long> key;
    for (Vertex i = 0; i < n; ++i)
      if (i != g.root()) key.push_back(static_cast<long>(std::floor(s->u[i] / w)));
    auto& b = bins[key];
    b.first += z2;
    ++b.second;
  }
  for (Vertex i = 0; i < n; ++i) {
    if (i == g.root()) continue;
    const auto ks = ks_test(stdz[i], standard_normal_cdf);
    out.push_back({"ks_s" + std::to_string(i) + "_standardized", ks.statistic,
                   ks.p_value, ks.p_value > alpha, alpha, ks.n, seed,
                   "s_i / sd(s_i | u) against N(0,1)"});
  }
  {
    const double dof = static_cast<double>(p * acc.size());
    const double pt = two_sided_chi2(total, dof);
    out.push_back({"s_chi2_total", total / dof, pt, pt > alpha, alpha, acc.size(), seed,
                   "mean |z|^2 per component, expected 1"});
    double vars = 0.0;
    int nb = 0;
    for (const auto& [key, b] : bins) {
      if (b.second < static_cast<std::uint64_t>(law.options().min_bin_count)) continue;
      ++nb;
      const double e = static_cast<double>(p * b.second);
      vars += (b.first - e) * (b.first - e) / (2.0 * e);
    }
    if (nb > 0) {
      const double pv = chi_square_sf(vars, nb);
      out.push_back({"s_bin_variances", vars, pv, pv > alpha, alpha, acc.size(), seed,
                     std::to_string(nb) + " u-bins, normal approximation per bin"});
    }
  }
  for (Vertex i = 0; i < n; ++i) {
    if (i == g.root()) continue;
    std::vector<double> x;
    x.reserve(acc.size());
    for (auto* s : acc) x.push_back(s->u[i]);
    const auto& F = law.u_marginal(i);
    const auto ks = ks_test(std::move(x), [&F](double y) { return F(y); });
    out.push_back({"ks_u" + std::to_string(i), ks.statistic, ks.p_value,
                   ks.p_value > alpha, alpha, ks.n, seed,
                   "against the mu^susy u-marginal"});
    const auto& z = near0[i];
    if (z.size() >= static_cast<std::size_t>(law.options().min_bin_count)) {
      double ss = 0.0;
      for (double y : z) ss += y * y;
      const double pv = two_sided_chi2(ss, static_cast<double>(z.size()));
      out.push_back({"s" + std::to_string(i) + "_variance_near_u0", ss / z.size(), pv,
                     pv > alpha, alpha, z.size(), seed,
                     "var(s_i / sd) over |u| < 0.1, expected 1"});
    }
  }
  return out;
}

std::vector<TestReport> compare_fluctuations(const EnsembleResult& ens,
                                             const LimitLaw& law) {
  return compare_fluctuations(ens.samples, law, ens.config.seed);
}

std::vector<TestReport> crossing_mean_reports(const EnsembleResult& ens,
                                              const WeightedGraph& g) {
  std::vector<TestReport> out;
  for (int d = 0; d < g.directed_edge_count(); ++d) {
    auto [i, j] = g.directed(d);
    const double m = ens.crossing_ratio_mean[d], se = ens.crossing_ratio_stderr[d];
    const double z = se > 0.0 ? (m - 0.5 * g.directed_weight(d)) / se : INFINITY;
    out.push_back({"crossing_mean_" + std::to_string(i) + "_" + std::to_string(j), m,
                   NAN, std::abs(z) <= 3.0, 3.0, ens.in_Q, ens.config.seed,
                   "W/2 = " + fmt(0.5 * g.directed_weight(d)) + ", z = " + fmt(z)});
  }
  return out;
}

TestReport in_O_report(const EnsembleResult& ens, double threshold) {
  return {"in_O_rate", ens.in_O_rate, NAN, ens.in_O_rate >= threshold, threshold,
          ens.config.n, ens.config.seed, std::to_string(ens.in_O) + " records in O"};
}

// ---------------------------------------------------------------------------

std::vector<std::optional<RescaledObservables>> sample_limit(const LimitLaw& law,
                                                             std::uint64_t n,
                                                             std::uint64_t seed,
                                                             bool discrete_only) {
  std::vector<std::optional<RescaledObservables>> out(n);
  for (std::uint64_t k = 0; k < n; ++k) {
    auto rng = trajectory_stream(seed, k, kNullPurpose);
    out[k] = discrete_only ? law.draw_cell(rng) : law.draw(rng);
  }
  return out;
}

bool CalibrationResult::passed() const {
  for (const auto& [name, t] : tally)
    if (t.first < required_fraction * t.second) return false;
  return !tally.empty();
}

CalibrationResult null_calibration(const LimitLaw& law, std::uint64_t n,
                                   const std::vector<std::uint64_t>& seeds,
                                   bool two_scale, bool discrete_only,
                                   const std::vector<std::string>& only) {
  CalibrationResult res;
  res.seeds = seeds;
  for (auto seed : seeds) {
    const auto samples = sample_limit(law, n, seed, discrete_only);
    auto reports = compare_single_time(samples, law, seed);
    if (two_scale && !discrete_only) {
      auto f = compare_fluctuations(samples, law, seed);
      reports.insert(reports.end(), f.begin(), f.end());
    }
    for (const auto& r : reports) {
      if (!only.empty() && std::find(only.begin(), only.end(), r.name) == only.end())
        continue;
      auto& t = res.tally[r.name];
      t.first += r.passed;
      ++t.second;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------

ObservableRecord symmetric_point(const WeightedGraph& g, Vertex i0, double sigma,
                                 double sigma_prime) {
  const int n = g.vertex_count();
  ObservableRecord rec;
  rec.sigma = sigma;
  rec.sigma_prime = sigma_prime;
  rec.start = i0;
  rec.l.assign(n, sigma / n);
  rec.l_prime.assign(n, sigma_prime / n);
  auto crossings = [&](const std::vector<double>& l) {
    IntegerCurrent k;
    k.source = k.sink = i0;
    k.values.resize(g.directed_edge_count());
    for (int d = 0; d < g.directed_edge_count(); ++d) {
      auto [i, j] = g.directed(d);
      k.values[d] = std::max<std::int64_t>(
          1, std::llround(0.5 * g.directed_weight(d) * std::sqrt(l[i] * l[j])));
    }
    return k;
  };
  rec.k = crossings(rec.l);
  rec.k_prime = crossings(rec.l_prime);
  rec.end1 = rec.end2 = i0;
  rec.tree1 = bfs_tree(g, i0);
  rec.tree2 = bfs_tree(g, i0);
  rec.in_O = compute_in_O(rec);
  return rec;
}

RatioScan density_ratio_scan(const WeightedGraph& g, Vertex i0,
                             const std::vector<double>& sigma_list,
                             const PointSelector& selector, double exponent,
                             double max_slope) {
  if (sigma_list.size() < 2) throw PreconditionViolation("need at least two sigmas");
  for (std::size_t k = 1; k < sigma_list.size(); ++k)
    if (!(sigma_list[k] > sigma_list[k - 1]))
      throw PreconditionViolation("sigma list must be increasing");
  RatioScan scan;
  for (double s : sigma_list) {
    const double sp = std::pow(s, exponent);
    const auto rec = selector(g, i0, s, sp);
    const double r = limiting_density_ratio(g, rec, i0);
    scan.sigmas.push_back(s);
    scan.sigma_primes.push_back(sp);
    scan.ratios.push_back(r);
    scan.deviations.push_back(std::abs(r - 1.0));
    scan.fitted_c = std::max(scan.fitted_c, std::abs(r - 1.0) * std::sqrt(s));
  }
  scan.decreasing = true;
  for (std::size_t k = 1; k < scan.deviations.size(); ++k)
    if (!(scan.deviations[k] < scan.deviations[k - 1])) scan.decreasing = false;
  double mx = 0.0, my = 0.0;
  const double m = static_cast<double>(scan.sigmas.size());
  for (std::size_t k = 0; k < scan.sigmas.size(); ++k) {
    mx += std::log(scan.sigmas[k]) / m;
    my += std::log(scan.deviations[k]) / m;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < scan.sigmas.size(); ++k) {
    const double dx = std::log(scan.sigmas[k]) - mx;
    sxy += dx * (std::log(scan.deviations[k]) - my);
    sxx += dx * dx;
  }
  scan.slope = sxy / sxx;
  std::string note = "|ratio-1|:";
  for (double d : scan.deviations) note += " " + fmt(d);
  note += "; C = " + fmt(scan.fitted_c);
  scan.report = {"density_ratio_scan", scan.slope, NAN,
                 scan.decreasing && scan.slope <= max_slope, max_slope,
                 scan.sigmas.size(), 0, note};
  return scan;
}

}  // namespace vrjp
