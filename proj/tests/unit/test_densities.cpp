#include "doctest.h"

#include <numbers>
#include <random>

#include "test_util.hpp"
#include "vrjp/densities.hpp"
#include "vrjp/errors.hpp"
#include "vrjp/harness.hpp"
#include "vrjp/oracles.hpp"

using namespace vrjp;
using vrjp::test::fixture;
using vrjp::test::int_current;
using vrjp::test::rel_err;
using std::numbers::pi;

namespace {

std::vector<double> random_field(const WeightedGraph& g, std::mt19937_64& rng, double sd) {
  std::normal_distribution<double> nd(0.0, sd);
  std::vector<double> x(g.vertex_count());
  for (int i = 0; i < g.vertex_count(); ++i) x[i] = i == g.root() ? 0.0 : nd(rng);
  return x;
}

double integrate_1d(const std::function<double(double)>& f, double a, double b) {
  QuadratureSpec q;
  q.lower = {a};
  q.upper = {b};
  q.tolerance = 1e-12;
  return quadrature([&](std::span<const double> x) { return f(x[0]); }, q).value;
}

}  // namespace

TEST_CASE("mu_susy") {
  auto k2 = fixture("K2");
  auto t = enumerate_spanning_trees(k2)[0];
  CHECK(mu_susy_density(k2, {0, 0}, {0, 0}, t).value() ==
        doctest::Approx(1.0 / (2 * pi)).epsilon(1e-14));
  auto far = mu_susy_density(k2, {0, 0}, {0, 900.0}, t);
  CHECK_FALSE(std::isnan(far.log_value));
  CHECK(far.log_value < -300.0);
  CHECK(mu_susy_density(k2, {0, 3.0}, {0, 900.0}, t).value() == 0.0);
  CHECK(far.value() == 0.0);

  auto tri = fixture("triangle");
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    auto s = random_field(tri, rng, 1.0), u = random_field(tri, rng, 1.5);
    for (const auto& tp : enumerate_spanning_trees(tri)) {
      const double a = mu_susy_density(tri, s, u, tp).log_value;
      CHECK(std::abs(a - hp_log_mu_susy_density(tri, s, u, tp)) < 1e-12);
    }
  }
}

TEST_CASE("rho_big") {
  auto k2 = fixture("K2");
  auto t = enumerate_spanning_trees(k2)[0];
  auto z = vrjp::test::current(k2, {});
  auto r0 = rho_big(k2, z, z, {0, 0}, {0, 0}, {0, 0}, 0, 0, t, t);
  CHECK(r0.value() == doctest::Approx(1.0 / (4 * pi * pi)).epsilon(1e-14));

  auto tri = fixture("triangle");
  std::mt19937_64 rng(2);
  auto trees = enumerate_spanning_trees(tri);
  auto zt = vrjp::test::current(tri, {});
  for (int rep = 0; rep < 10; ++rep) {
    auto s = random_field(tri, rng, 1.0), u = random_field(tri, rng, 1.0);
    std::normal_distribution<double> nd;
    auto kap = vrjp::test::current(tri, {});
    for (auto& x : kap.values) x = nd(rng);
    const double full = rho_big(tri, kap, kap, s, u, u, 1, 2, trees[0], trees[1]).log_value;
    CHECK(std::abs(full - hp_log_rho_big(tri, kap, kap, s, u, u, 1, 2, trees[0], trees[1])) <
          1e-12);
    // kappa = 0 leaves the kappa-free part
    const double base = rho_big(tri, zt, zt, s, u, u, 1, 2, trees[0], trees[1]).log_value;
    const auto w = omega_of(tri, u);
    double g = 0.0;
    for (int d = 0; d < tri.directed_edge_count(); ++d)
      g -= kap.values[d] * kap.values[d] / w[d / 2];
    CHECK(full - base == doctest::Approx(g).epsilon(1e-12));
  }
}

TEST_CASE("rho_big integrated over currents gives the full marginal") {
  for (const char* name : {"K2", "triangle"}) {
    auto g = fixture(name);
    auto trees = enumerate_spanning_trees(g);
    auto z = vrjp::test::current(g, {});
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 3; ++rep) {
      auto s = random_field(g, rng, 0.7), u = random_field(g, rng, 0.7);
      const double base = rho_big(g, z, z, s, u, u, 0, 1, trees.back(), trees[0]).value();
      const double gci = gaussian_current_integral_iota(g, omega_of(g, u), 1e-6).value;
      const double marg = marginal_full_density(g, s, u, 0, 1, trees.back(), trees[0]).value();
      CHECK(rel_err(base * gci * gci, marg) < 1e-6);
    }
  }
}

TEST_CASE("marginal_full") {
  auto k2 = fixture("K2");
  auto t = enumerate_spanning_trees(k2)[0];
  for (int a : {0, 1})
    for (int b : {0, 1})
      CHECK(marginal_full_density(k2, {0, 0}, {0, 0}, a, b, t, t).value() ==
            doctest::Approx(1.0 / (8 * pi)).epsilon(1e-14));

  for (const char* name : {"K2", "triangle", "C4_chord"}) {
    auto g = fixture(name);
    auto trees = enumerate_spanning_trees(g);
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 10; ++rep) {
      auto s = random_field(g, rng, 1.0), u = random_field(g, rng, 1.0);
      const auto& tp = trees[rep % trees.size()];
      double sum = 0.0;
      for (int a = 0; a < g.vertex_count(); ++a)
        for (int b = 0; b < g.vertex_count(); ++b)
          for (const auto& t1 : trees) sum += marginal_full_density(g, s, u, a, b, t1, tp).value();
      CHECK(rel_err(sum, mu_susy_density(g, s, u, tp).value()) < 1e-12);
    }
  }
}

TEST_CASE("single-time marginal") {
  auto k2 = fixture("K2");
  auto t = enumerate_spanning_trees(k2)[0];
  auto z = vrjp::test::current(k2, {});
  for (int i1 : {0, 1})
    CHECK(single_time_marginal_density(k2, z, {0, 0}, i1, t).value() ==
          doctest::Approx(1.0 / (2 * pi)).epsilon(1e-14));

  for (double v1 : {-1.3, 0.0, 0.4, 2.0}) {
    std::vector<double> v{0.0, v1};
    const double sd = std::sqrt(omega_of(k2, v)[0]);
    const double direct = integrate_1d(
        [&](double x) {
          return single_time_marginal_density(k2, vrjp::test::current(k2, {x, x}), v, 1, t)
              .value();
        },
        -14 * sd, 14 * sd);
    CHECK(rel_err(direct, single_time_v_density(k2, v, 1, t).value()) < 1e-8);
  }

  auto tri = fixture("triangle");
  CHECK_THROWS_AS(single_time_marginal_density(tri, vrjp::test::current(tri, {1.0}),
                                               {0, 0, 0}, 0, enumerate_spanning_trees(tri)[0]),
                  NotInH);
}

TEST_CASE("single-time marginal under a relabeling") {
  // weights symmetric under swapping vertices 1 and 2
  auto g = build_graph({{0, 1, 1.0}, {0, 2, 1.0}, {1, 2, 0.6}});
  auto t0 = bfs_tree(g);
  auto cyc = fundamental_cycles(g, t0);
  auto kap = vrjp::test::current(g, {});
  for (int d : cyc[0].directed_path) kap.values[d] = 0.8;
  auto swapped = vrjp::test::current(g, {});
  auto perm = [](int i) { return i == 0 ? 0 : 3 - i; };
  for (int d = 0; d < g.directed_edge_count(); ++d) {
    auto [a, b] = g.directed(d);
    swapped.values[g.directed_index(perm(a), perm(b))] = kap.values[d];
  }
  const std::vector<double> v{0.0, 0.3, -0.5}, vs{0.0, -0.5, 0.3};
  auto t = vrjp::test::tree_of(g, {{0, 1}, {1, 2}});
  auto ts = vrjp::test::tree_of(g, {{0, 2}, {1, 2}});
  CHECK(single_time_marginal_density(g, kap, v, 1, t).log_value ==
        doctest::Approx(single_time_marginal_density(g, swapped, vs, 2, ts).log_value)
            .epsilon(1e-13));
}

TEST_CASE("pp factor") {
  auto k2 = fixture("K2");
  auto t = vrjp::test::dtree(k2, 0, {{0, 1}});
  auto k = int_current(k2, {1, 1}, 0, 0);
  CHECK(pp_factor(k2, k, {1, 1}, t).value() == doctest::Approx(0.25).epsilon(1e-14));

  auto k2w = build_graph({{0, 1, 2.0}});
  auto k3 = int_current(k2, {3, 3}, 0, 0);
  CHECK(pp_factor(k2w, k3, {1.5, 0.7}, t).log_value ==
        doctest::Approx(pp_factor(k2, k3, {1.5, 0.7}, t).log_value + 6 * std::log(2.0)));

  auto big = int_current(k2, {4000, 4000}, 0, 0);
  const double a = pp_factor(k2, big, {3000.0, 2500.0}, t).log_value;
  CHECK(std::abs(a - hp_log_pp_factor(k2, big, {3000.0, 2500.0}, t)) < 1e-10 * std::abs(a));
}

TEST_CASE("finite-time density") {
  auto k2 = fixture("K2");
  auto k = int_current(k2, {1, 1}, 0, 0);
  auto kp = int_current(k2, {2, 1}, 0, 1);
  auto t = vrjp::test::dtree(k2, 0, {{0, 1}});
  auto tp = vrjp::test::dtree(k2, 1, {{0, 1}});
  auto d = finite_time_density(k2, k, kp, {1, 1}, {2, 2}, 0, 1, t, tp);
  CHECK(d.value() == doctest::Approx(std::exp(-3.0) / 16).epsilon(1e-13));
  CHECK(std::abs(d.log_value - hp_log_finite_time_density(k2, k, kp, {1, 1}, {2, 2}, 1, t, tp)) <
        1e-12);
  double prev = d.log_value;
  for (double l1 : {10.0, 100.0, 1000.0}) {
    auto x = finite_time_density(k2, k, kp, {1, l1}, {2, 2}, 0, 1, t, tp).log_value;
    CHECK(x < prev);
    prev = x;
  }
  CHECK(prev < -50.0);
}

TEST_CASE("path count") {
  auto k2 = fixture("K2");
  auto t = vrjp::test::dtree(k2, 0, {{0, 1}});
  for (int n = 1; n <= 40; ++n)
    CHECK(path_count(k2, int_current(k2, {n, n}, 0, 0), t, 0, 0) == 1);

  auto tri = fixture("triangle");
  auto k = int_current(tri, {}, 0, 0);
  k.values[tri.directed_index(0, 1)] = 1;
  k.values[tri.directed_index(1, 2)] = 1;
  k.values[tri.directed_index(2, 0)] = 1;
  CHECK(path_count(tri, k, vrjp::test::dtree(tri, 0, {{1, 2}, {2, 0}}), 0, 0) == 1);
  // 0 is the root, so the edge 0-1 cannot be a last exit of 2
  CHECK(path_count(tri, k, vrjp::test::dtree(tri, 0, {{0, 1}, {2, 0}}), 0, 0) == 0);
}

TEST_CASE("path count matches enumeration") {
  for (const char* name : {"K2", "P3", "triangle"}) {
    auto g = fixture(name);
    const int nd = g.directed_edge_count();
    std::vector<std::int64_t> k(nd, 0);
    int checked = 0;
    // every k with sum <= 7
    std::function<void(int, int)> rec = [&](int d, int left) {
      if (d == nd) {
        for (Vertex a = 0; a < g.vertex_count(); ++a) {
          IntegerCurrent c = int_current(g, k, a, -1);
          auto div = c.divergence(g);
          Vertex b = a;
          bool ok = true;
          for (Vertex i = 0; i < g.vertex_count(); ++i) {
            const auto want = i == a ? 1 : 0;
            if (div[i] == want) continue;
            if (div[i] == want - 1 && b == a) b = i;
            else ok = false;
          }
          if (!ok) continue;
          auto en = enumerate_paths(g, a, b, c);
          c.sink = b;
          for (const auto& dt : directed_trees_toward(g, b)) {
            const auto it = en.by_tree.find(dt.parent);
            const std::uint64_t want = it == en.by_tree.end() ? 0 : it->second;
            CHECK(path_count(g, c, dt, a, b) == want);
            ++checked;
          }
        }
        return;
      }
      for (int x = 0; x <= left; ++x) {
        k[d] = x;
        rec(d + 1, left - x);
      }
      k[d] = 0;
    };
    rec(0, 7);
    CHECK(checked > 0);
  }
}

TEST_CASE("volume factor") {
  auto k2 = fixture("K2");
  auto k = int_current(k2, {1, 1}, 0, 0);
  CHECK(volume_factor(k2, k, {2.5, 7.0}, 0).value() == doctest::Approx(2.5).epsilon(1e-14));

  // P = |Pi| V prod (W/2)^k
  auto tri = fixture("triangle");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ul(0.2, 3.0);
  auto kk = int_current(tri, {}, 0, 0);
  kk.values[tri.directed_index(0, 1)] = 2;
  kk.values[tri.directed_index(1, 0)] = 2;
  kk.values[tri.directed_index(1, 2)] = 1;
  kk.values[tri.directed_index(2, 1)] = 1;
  kk.values[tri.directed_index(2, 0)] = 1;
  kk.values[tri.directed_index(0, 2)] = 1;
  for (const auto& dt : directed_trees_toward(tri, 0)) {
    const auto cnt = path_count(tri, kk, dt, 0, 0);
    if (cnt == 0) continue;
    for (int rep = 0; rep < 5; ++rep) {
      std::vector<double> l{ul(rng), ul(rng), ul(rng)};
      double lhs = pp_factor(tri, kk, l, dt).log_value;
      double rhs = std::log(cnt.convert_to<double>()) + volume_factor(tri, kk, l, 0).log_value;
      for (int d = 0; d < tri.directed_edge_count(); ++d)
        rhs += kk.values[d] * std::log(tri.directed_weight(d) / 2);
      CHECK(std::abs(lhs - rhs) < 1e-12 * std::max(1.0, std::abs(lhs)));
    }
  }
}

TEST_CASE("gaussian current integral") {
  auto k2 = fixture("K2");
  CHECK(gaussian_current_integral(k2, {0.7}) == doctest::Approx(std::sqrt(pi * 0.7)).epsilon(1e-14));

  auto tri = fixture("triangle");
  std::vector<double> w{0.5, 0.5, 0.5};
  // H on the triangle: tree edges carry kappa_ij + kappa_ji fixed by the
  // cycle flow; reduce to the free coordinates via the determinant route.
  const double closed = gaussian_current_integral(tri, w);
  CHECK(rel_err(closed, gaussian_current_integral_determinant(tri, w)) < 1e-12);
  CHECK(rel_err(closed, gaussian_current_integral_cycle_space(tri, w, 1e-10).value) < 1e-8);
  CHECK(gaussian_current_integral(tri, {0.3, 1.1, 0.8}, true) ==
        doctest::Approx(std::pow(gaussian_current_integral(tri, {0.3, 1.1, 0.8}), 2)).epsilon(1e-12));
  CHECK(s_gaussian_integral(k2, {0.5}) == doctest::Approx(std::sqrt(pi / 0.5)).epsilon(1e-13));
}

TEST_CASE("lambda density") {
  auto k2 = fixture("K2");
  const double s = 12.0, sp = 700.0;
  CHECK(lambda_density(k2, {s / 2, s / 2}, {sp / 2, sp / 2}, s, sp, 0).value() ==
        doctest::Approx(std::pow(s / 2, -1.0) * std::pow(sp / 2, -1.5)).epsilon(1e-13));

  auto tri = fixture("triangle");
  const std::vector<double> l{1.0, 2.0, 3.5}, lp{4.0, 0.5, 1.5};
  const double base = lambda_density(tri, l, lp, 6.5, 6.0, 0).log_value;
  const double c = 3.7;
  std::vector<double> cl, clp;
  for (double x : l) cl.push_back(c * x);
  for (double x : lp) clp.push_back(c * x);
  CHECK(lambda_density(tri, cl, lp, c * 6.5, 6.0, 0).log_value ==
        doctest::Approx(base - 3 * std::log(c)).epsilon(1e-13));
  CHECK(lambda_density(tri, l, clp, 6.5, c * 6.0, 0).log_value ==
        doctest::Approx(base - 4 * std::log(c)).epsilon(1e-13));
  CHECK_THROWS_AS(lambda_density(tri, l, lp, 7.0, 6.0, 0), PreconditionViolation);
}

TEST_CASE("limiting density ratio") {
  auto k2 = fixture("K2");
  double prev = INFINITY;
  for (double sigma : {10.0, 100.0, 1000.0}) {
    const double r = limiting_density_ratio(k2, symmetric_point(k2, 0, sigma, std::pow(sigma, 3)), 0);
    CHECK(std::isfinite(r));
    CHECK(r > 0.0);
    CHECK(std::abs(r - 1.0) < prev);
    prev = std::abs(r - 1.0);
  }

  // swap vertices 1 and 2 on a triangle with W01 = W02
  auto g = build_graph({{0, 1, 1.0}, {0, 2, 1.0}, {1, 2, 0.6}});
  auto perm = [](int i) { return i == 0 ? 0 : 3 - i; };
  auto relabel_tree = [&](const DirectedTree& t) {
    DirectedTree out;
    out.root = perm(t.root);
    out.parent.assign(3, -1);
    for (int i = 0; i < 3; ++i)
      if (t.parent[i] >= 0) out.parent[perm(i)] = perm(t.parent[i]);
    SpanningTree sh;
    for (int i = 0; i < 3; ++i)
      if (out.parent[i] >= 0) sh.push_back(g.edge_index(i, out.parent[i]));
    std::sort(sh.begin(), sh.end());
    out.undirected_shadow = sh;
    return out;
  };
  int seen = 0;
  for (int i = 0; i < 200 && seen < 5; ++i) {
    auto rng = trajectory_stream(21, i);
    auto rec = simulate_two_scales(g, 0, 40.0, 3000.0, rng);
    if (!rec.in_O) continue;
    ++seen;
    ObservableRecord sw = rec;
    for (int v = 0; v < 3; ++v) {
      sw.l[perm(v)] = rec.l[v];
      sw.l_prime[perm(v)] = rec.l_prime[v];
    }
    for (int d = 0; d < g.directed_edge_count(); ++d) {
      auto [a, b] = g.directed(d);
      const int e = g.directed_index(perm(a), perm(b));
      sw.k.values[e] = rec.k.values[d];
      sw.k_prime.values[e] = rec.k_prime.values[d];
    }
    sw.end1 = perm(rec.end1);
    sw.end2 = perm(rec.end2);
    sw.k.sink = sw.k_prime.source = sw.end1;
    sw.k_prime.sink = sw.end2;
    sw.tree1 = relabel_tree(*rec.tree1);
    sw.tree2 = relabel_tree(*rec.tree2);
    CHECK(limiting_density_ratio(g, sw, 0) ==
          doctest::Approx(limiting_density_ratio(g, rec, 0)).epsilon(1e-12));
  }
  CHECK(seen == 5);
}
