#include "doctest.h"

#include <numbers>

#include "test_util.hpp"
#include "vrjp/densities.hpp"
#include "vrjp/errors.hpp"
#include "vrjp/oracles.hpp"

using namespace vrjp;
using vrjp::test::fixture;
using vrjp::test::int_current;
using vrjp::test::rel_err;

TEST_CASE("path enumeration") {
  auto k2 = fixture("K2");
  auto en = enumerate_paths(k2, 0, 0, int_current(k2, {2, 2}, 0, 0));
  CHECK(en.total == 1);
  REQUIRE(en.by_tree.size() == 1);
  CHECK(en.by_tree.begin()->first == std::vector<Vertex>{-1, 0});

  auto tri = fixture("triangle");
  auto k = int_current(tri, {}, 0, 0);
  k.values[tri.directed_index(0, 1)] = 1;
  k.values[tri.directed_index(1, 2)] = 1;
  k.values[tri.directed_index(2, 0)] = 1;
  auto e2 = enumerate_paths(tri, 0, 0, k);
  CHECK(e2.total == 1);
  CHECK(e2.by_tree.at({-1, 2, 0}) == 1);

  // no path: wrong endpoint
  CHECK(enumerate_paths(k2, 0, 1, int_current(k2, {1, 1}, 0, 1)).total == 0);
  CHECK_THROWS_AS(enumerate_paths(k2, 0, 0, int_current(k2, {8, 8}, 0, 0)),
                  EnumerationBudgetExceeded);
}

TEST_CASE("adaptive quadrature") {
  QuadratureSpec q;
  q.lower = {-12.0};
  q.upper = {12.0};
  q.tolerance = 1e-13;
  auto r = quadrature([](std::span<const double> x) { return std::exp(-x[0] * x[0]); }, q);
  CHECK(std::abs(r.value - std::sqrt(std::numbers::pi)) < 1e-10);

  QuadratureSpec box;
  box.dimension = 3;
  box.lower = {0, 0, 0};
  box.upper = {1, 1, 1};
  CHECK(quadrature([](std::span<const double>) { return 1.0; }, box).value ==
        doctest::Approx(1.0).epsilon(1e-14));

  QuadratureSpec g2;
  g2.dimension = 2;
  g2.lower = {-10, -10};
  g2.upper = {10, 10};
  g2.tolerance = 1e-10;
  auto r2 = quadrature(
      [](std::span<const double> x) {
        return std::exp(-x[0] * x[0] - 2 * x[1] * x[1] + x[0] * x[1]);
      },
      g2);
  // determinant of [[1, -1/2], [-1/2, 2]] is 7/4
  CHECK(rel_err(r2.value, std::numbers::pi / std::sqrt(1.75)) < 1e-9);

  QuadratureSpec tight = g2;
  tight.max_evaluations = 100;
  CHECK_THROWS_AS(quadrature([](std::span<const double> x) { return std::exp(-x[0] * x[0] * 50); },
                             tight),
                  MaxEvaluationsExceeded);
}

TEST_CASE("susy normalization on K2") {
  auto r = susy_normalization(fixture("K2"), 1e-8);
  CHECK(std::abs(r.value - 1.0) < 1e-6);
}

TEST_CASE("gaussian current integral routes agree") {
  for (const char* name : {"K2", "triangle", "C4_chord"}) {
    auto g = fixture(name);
    std::vector<double> w;
    for (int e = 0; e < g.edge_count(); ++e) w.push_back(0.4 + 0.3 * e);
    const double closed = gaussian_current_integral(g, w);
    CHECK(rel_err(gaussian_current_integral_determinant(g, w), closed) < 1e-12);
    CHECK(rel_err(gaussian_current_integral_cycle_space(g, w, 1e-9).value, closed) < 1e-6);
  }
  auto tri = fixture("triangle");
  CHECK(rel_err(gaussian_current_integral_iota(tri, {0.5, 0.5, 0.5}, 1e-5).value,
                gaussian_current_integral(tri, {0.5, 0.5, 0.5})) < 1e-6);
}

TEST_CASE("Monte Carlo probabilities on K2") {
  auto k2 = fixture("K2");
  auto all = mc_probability(k2, 0, 2.0, 2.0, 20000, 1, 2, [](const ObservableRecord&) { return true; });
  CHECK(all.estimate == 1.0);

  // end1 = 1 needs an odd number of first-window crossings
  EventSpec odd;
  odd.k = int_current(k2, {1, 1}, 0, 1);
  odd.k_prime = int_current(k2, {0, 0}, 1, 1);
  odd.l_box = {{0, 0}, {0.0, 2.0}};
  odd.l_prime_box = {{0, 0}, {0.0, 2.0}};
  odd.i1 = 1;
  odd.i1_prime = 1;
  odd.tree = vrjp::test::dtree(k2, 1, {{0, 1}});
  odd.tree_prime = odd.tree;
  CHECK(mc_event_probability(k2, 0, odd, 2.0, 2.0, 20000, 2, 2).hits == 0);

  EventSpec ev;
  ev.k = int_current(k2, {1, 1}, 0, 0);
  ev.k_prime = int_current(k2, {1, 0}, 0, 1);
  ev.l_box = {{0, 0}, {0.3, 1.2}};
  ev.l_prime_box = {{0, 0}, {0.5, 1.8}};
  ev.i1 = 0;
  ev.i1_prime = 1;
  ev.tree = vrjp::test::dtree(k2, 0, {{0, 1}});
  ev.tree_prime = vrjp::test::dtree(k2, 1, {{0, 1}});
  auto mc = mc_event_probability(k2, 0, ev, 2.0, 2.0, 200000, 3, 4);
  auto q = event_probability_quadrature(k2, ev, 2.0, 2.0, 1e-9);
  CHECK(mc.hits > 100);
  CHECK(std::abs(mc.estimate - q.value) < 3.0 * mc.stderr_);
}

TEST_CASE("Jacobian") {
  const double s = 10.0, sp = 50.0;
  auto k2 = jacobian_check({s / 2, s / 2}, {sp / 2, sp / 2}, s, sp, 0);
  CHECK(k2.relative_error < 1e-6);
  auto tri = jacobian_check({3.0, 5.0, 2.0}, {20.0, 10.0, 20.0}, s, sp, 0);
  CHECK(tri.relative_error < 1e-5);
  auto coarse = jacobian_check({3.0, 5.0, 2.0}, {20.0, 10.0, 20.0}, s, sp, 0, 1e-2);
  CHECK(coarse.relative_error > tri.relative_error);
  CHECK_THROWS_AS(jacobian_check({10.0 - 1e-9, 1e-9}, {25.0, 25.0}, s, sp, 0), SingularPoint);
  // at u != v the (s, u) Jacobian differs from the closed form
  auto su = jacobian_check({3.0, 5.0, 2.0}, {20.0, 10.0, 20.0}, s, sp, 0, 1e-5,
                           JacobianTarget::SU);
  CHECK(su.relative_error > 1e-3);
}

TEST_CASE("high-precision re-evaluation") {
  auto tri = fixture("triangle");
  auto trees = enumerate_spanning_trees(tri);
  std::vector<double> s{0, 0.3, -1.1}, u{0, 2.0, -0.4};
  CHECK(std::abs(mu_susy_density(tri, s, u, trees[2]).log_value -
                 hp_log_mu_susy_density(tri, s, u, trees[2])) < 1e-12);
}
