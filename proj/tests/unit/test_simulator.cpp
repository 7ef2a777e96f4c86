#include "doctest.h"

#include <bit>

#include "test_util.hpp"
#include "vrjp/detail/holding_time.hpp"
#include "vrjp/errors.hpp"
#include "vrjp/rng.hpp"
#include "vrjp/simulator.hpp"

using namespace vrjp;
using vrjp::test::fixture;

TEST_CASE("philox known answers") {
  // Random123 kat_vectors, philox4x32 with 10 rounds
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) ==
        std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                   {0xffffffff, 0xffffffff}) ==
        std::array<std::uint32_t, 4>{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                   {0xa4093822, 0x299f31d0}) ==
        std::array<std::uint32_t, 4>{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("trajectory streams are distinct and reproducible") {
  auto a = trajectory_stream(1, 0), b = trajectory_stream(1, 1), c = trajectory_stream(2, 0);
  CHECK_FALSE(a == b);
  CHECK_FALSE(a == c);
  CHECK(trajectory_stream(1, 0) == a);
  CHECK_FALSE(trajectory_stream(1, 0, 7) == a);
  double mean = 0.0;
  for (int i = 0; i < 100000; ++i) mean += uniform01(a());
  CHECK(mean / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("holding time matches -log(u)/rate") {
  auto rng = trajectory_stream(11, 0);
  double worst = 0.0;
  for (int i = 0; i < 200000; ++i) {
    std::uint64_t bits = rng();
    if (i % 1000 == 0) bits >>= (i / 1000) % 64;  // exercise long leading-zero runs
    if (bits == 0) continue;
    const double rate = 0.1 + 10.0 * uniform01(rng());
    const int z = std::countl_zero(bits);
    const std::uint64_t m = z + 1 < 64 ? (bits << (z + 1)) >> 12 : 0;
    const double u = std::ldexp(1.0 + std::ldexp(static_cast<double>(m), -52), -(z + 1));
    const double exact = -std::log(u) / rate;
    const double got = detail::holding_time<double>(bits, rate);
    worst = std::max(worst, std::abs(got - exact) / exact);
  }
  CHECK(worst < 1e-15);
}

TEST_CASE("Y trajectory basics") {
  auto g = fixture("triangle");
  auto rng = trajectory_stream(3, 0);
  auto tr = simulate_Y(g, rng, 50.0);
  REQUIRE(tr.events.size() > 2);
  for (std::size_t i = 1; i < tr.events.size(); ++i)
    CHECK(tr.events[i].time > tr.events[i - 1].time);
  double total = 0.0;
  for (double L : tr.local_times_with_offset) total += L - 1.0;
  CHECK(total == doctest::Approx(50.0).epsilon(1e-12));
}

TEST_CASE("first holding time and first target on K2 and triangle") {
  auto k2 = fixture("K2");
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    auto rng = trajectory_stream(5, i);
    auto tr = simulate_Y(k2, rng, 100.0);
    REQUIRE(!tr.events.empty());
    sum += tr.events[0].time;
    sum2 += tr.events[0].time * tr.events[0].time;
  }
  const double mean = sum / n, se = std::sqrt((sum2 / n - mean * mean) / n);
  CHECK(std::abs(mean - 1.0) < 3.0 * se);

  auto tri = fixture("triangle");
  int to1 = 0;
  for (int i = 0; i < n; ++i) {
    auto rng = trajectory_stream(6, i);
    auto tr = simulate_Y(tri, rng, 100.0);
    to1 += tr.events[0].to == 1;
  }
  const double p = 1.0 / 2.3, phat = double(to1) / n;
  CHECK(std::abs(phat - p) < 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("time change D") {
  auto g = fixture("K2");
  auto rng = trajectory_stream(8, 0);
  auto tr = simulate_Y(g, rng, 20.0);
  REQUIRE(!tr.events.empty());
  CHECK(time_change_at(tr, 2, 0.0) == 0.0);
  const double t = 0.5 * tr.events[0].time;
  CHECK(time_change_at(tr, 2, t) == doctest::Approx(2 * t + t * t).epsilon(1e-14));

  auto z = time_change(tr, 2);
  const double zend = time_change_at(tr, 2, tr.final_time);
  CHECK(z.final_time == doctest::Approx(zend).epsilon(1e-13));
  auto l = z_local_times(z, 2, zend);
  for (int i = 0; i < 2; ++i) {
    const double L = tr.local_times_with_offset[i];
    CHECK(std::abs(l[i] - (L * L - 1.0)) <= 1e-12 * (L * L));
  }
}

TEST_CASE("Z local times sum to sigma") {
  auto g = fixture("C4_chord");
  auto rng = trajectory_stream(9, 0);
  auto tr = simulate_Y_until_Z(g, rng, 500.0);
  auto z = time_change(tr, g.vertex_count());
  for (double s : {1.0, 37.5, 250.0, 500.0}) {
    double total = 0.0;
    for (double x : z_local_times(z, g.vertex_count(), s)) total += x;
    CHECK(total == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("last-exit trees on hand-built paths") {
  auto k2 = fixture("K2");
  ZTrajectory z;
  z.start = 0;
  z.events = {{0.5, 1.0, 0, 1}};
  z.final_time = 3.0;
  auto t = last_exit_tree(k2, z, -1.0, 3.0);
  REQUIRE(t.has_value());
  CHECK(t->root == 1);
  CHECK(t->parent == std::vector<Vertex>{1, -1});

  ZTrajectory still;
  still.start = 0;
  still.final_time = 2.0;
  CHECK_FALSE(last_exit_tree(k2, still, -1.0, 2.0).has_value());

  auto tri = fixture("triangle");
  ZTrajectory w;
  w.start = 0;
  w.events = {{0.1, 1.0, 0, 1}, {0.2, 2.0, 1, 2}, {0.3, 3.0, 2, 0}};
  w.final_time = 4.0;
  auto tt = last_exit_tree(tri, w, -1.0, 4.0);
  REQUIRE(tt.has_value());
  CHECK(tt->root == 0);
  CHECK(tt->parent == std::vector<Vertex>{-1, 2, 0});

  auto k = z_crossings(tri, w, -1.0, 4.0);
  CHECK(k.values[tri.directed_index(0, 1)] == 1);
  CHECK(k.values[tri.directed_index(1, 2)] == 1);
  CHECK(k.values[tri.directed_index(2, 0)] == 1);
  CHECK(z_position(w, 2.5) == 2);
}

TEST_CASE("two-scale records obey the structural rules") {
  auto g = fixture("triangle");
  const double sigma = 30.0, sigma_prime = 400.0;
  for (int i = 0; i < 300; ++i) {
    auto rng = trajectory_stream(10, i);
    auto rec = simulate_two_scales(g, 0, sigma, sigma_prime, rng);
    double s1 = 0.0, s2 = 0.0;
    for (double x : rec.l) s1 += x;
    for (double x : rec.l_prime) s2 += x;
    CHECK(s1 == doctest::Approx(sigma).epsilon(1e-12));
    CHECK(s2 == doctest::Approx(sigma_prime).epsilon(1e-12));
    CHECK(check_kirchhoff(g, rec.k, 0, rec.end1));
    CHECK(check_kirchhoff(g, rec.k_prime, rec.end1, rec.end2));
    if (rec.tree1) CHECK(is_directed_tree_toward(g, *rec.tree1, rec.end1));
    if (rec.tree2) CHECK(is_directed_tree_toward(g, *rec.tree2, rec.end2));
    CHECK(rec.in_O == compute_in_O(rec));
  }
}

TEST_CASE("streaming record agrees with the stored trajectory") {
  auto g = fixture("C4");
  const double sigma = 20.0, sigma_prime = 300.0;
  for (int i = 0; i < 50; ++i) {
    auto r1 = trajectory_stream(12, i), r2 = trajectory_stream(12, i);
    auto rec = simulate_two_scales(g, 0, sigma, sigma_prime, r1);
    auto tr = simulate_Y_until_Z(g, r2, sigma + sigma_prime);
    auto ref = record_from_trajectory(g, 0, time_change(tr, g.vertex_count()), sigma,
                                      sigma_prime);
    CHECK(rec.k.values == ref.k.values);
    CHECK(rec.k_prime.values == ref.k_prime.values);
    CHECK(rec.end1 == ref.end1);
    CHECK(rec.end2 == ref.end2);
    CHECK(rec.tree1.has_value() == ref.tree1.has_value());
    if (rec.tree1 && ref.tree1) CHECK(*rec.tree1 == *ref.tree1);
    if (rec.tree2 && ref.tree2) CHECK(*rec.tree2 == *ref.tree2);
    for (int v = 0; v < g.vertex_count(); ++v) {
      CHECK(rec.l[v] == doctest::Approx(ref.l[v]).epsilon(1e-9));
      CHECK(rec.l_prime[v] == doctest::Approx(ref.l_prime[v]).epsilon(1e-9));
    }
    // k + k' is the crossing count over the whole run
    auto all = z_crossings(g, time_change(tr, g.vertex_count()), -1.0, sigma + sigma_prime);
    for (int d = 0; d < g.directed_edge_count(); ++d)
      CHECK(rec.k.values[d] + rec.k_prime.values[d] == all.values[d]);
  }
}

TEST_CASE("scalar and lane engines produce identical records") {
  auto g = fixture("triangle");
  if (!lane_engine_supported(g)) return;
  auto a = simulate_records(g, 0, 50.0, 2000.0, 99, 0, 64, 1, Engine::Scalar);
  auto b = simulate_records(g, 0, 50.0, 2000.0, 99, 0, 64, 3, Engine::Lanes);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].l == b[i].l);
    CHECK(a[i].l_prime == b[i].l_prime);
    CHECK(a[i].k.values == b[i].k.values);
    CHECK(a[i].k_prime.values == b[i].k_prime.values);
    CHECK(a[i].end2 == b[i].end2);
    CHECK(a[i].tree2.has_value() == b[i].tree2.has_value());
  }
}

TEST_CASE("records do not depend on thread count") {
  auto g = fixture("K2");
  auto a = simulate_records(g, 0, 10.0, 100.0, 4, 10, 40, 1);
  auto b = simulate_records(g, 0, 10.0, 100.0, 4, 10, 40, 4);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].l == b[i].l);
}

namespace {

ObservableRecord k2_record(std::int64_t k01, std::int64_t k10, double l0, double l1) {
  auto g = fixture("K2");
  ObservableRecord rec;
  rec.k = vrjp::test::int_current(g, {k01, k10}, 0, 0);
  rec.k_prime = vrjp::test::int_current(g, {k01, k10}, 0, 0);
  rec.l = {l0, l1};
  rec.l_prime = {l0, l1};
  rec.end1 = rec.end2 = 0;
  rec.tree1 = rec.tree2 = vrjp::test::dtree(g, 0, {{0, 1}});
  rec.in_O = true;
  return rec;
}

}  // namespace

TEST_CASE("rescaling") {
  auto g = fixture("K2");
  auto r = rescale(g, k2_record(5, 5, 4.0, 4.0), 0);
  CHECK(r.v[1] == doctest::Approx(0.0));
  CHECK(r.kappa.values[0] == doctest::Approx(1.5));

  auto rec = k2_record(5, 5, 2.0, 8.0);
  rec.l_prime = {20.0, 80.0};
  auto rs = rescale(g, rec, 0);
  CHECK(std::abs(rs.s[1]) < 1e-15);
  CHECK(rs.v[1] == doctest::Approx(std::log(2.0)));

  auto bad = rec;
  bad.l[1] = 0.0;
  CHECK_THROWS_AS(rescale(g, bad, 0), NotInO);
}

TEST_CASE("truncation event") {
  auto g = fixture("K2");
  RescaledObservables zero;
  zero.kappa = zero.kappa_prime = vrjp::test::current(g, {});
  zero.s = zero.u = zero.v = {0.0, 0.0};
  CHECK(truncation_event(zero, 1.0));
  auto big = zero;
  big.s[1] = 2.0;
  CHECK_FALSE(truncation_event(big, 1.0));
  CHECK(truncation_event(big, INFINITY));
}
