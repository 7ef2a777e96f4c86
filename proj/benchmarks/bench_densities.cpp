#include <benchmark/benchmark.h>

#include "vrjp/densities.hpp"
#include "vrjp/harness.hpp"

using namespace vrjp;

namespace {

const WeightedGraph& chord() {
  static const WeightedGraph g =
      build_graph({{0, 1, 1.0}, {1, 2, 0.7}, {2, 3, 1.3}, {0, 3, 0.9}, {0, 2, 0.5}});
  return g;
}

void BM_mu_susy(benchmark::State& state) {
  const auto& g = chord();
  const auto t = enumerate_spanning_trees(g)[3];
  const std::vector<double> s{0, 0.2, -0.4, 1.0}, u{0, -0.3, 0.8, 0.1};
  for (auto _ : state) benchmark::DoNotOptimize(mu_susy_density(g, s, u, t).log_value);
}

void BM_marginal_full(benchmark::State& state) {
  const auto& g = chord();
  const auto trees = enumerate_spanning_trees(g);
  const std::vector<double> s{0, 0.2, -0.4, 1.0}, u{0, -0.3, 0.8, 0.1};
  for (auto _ : state)
    benchmark::DoNotOptimize(marginal_full_density(g, s, u, 1, 2, trees[0], trees[5]).log_value);
}

void BM_limiting_ratio(benchmark::State& state) {
  const auto& g = chord();
  const double sigma = static_cast<double>(state.range(0));
  const auto rec = symmetric_point(g, 0, sigma, sigma * sigma * sigma);
  for (auto _ : state) benchmark::DoNotOptimize(limiting_density_ratio(g, rec, 0));
}

void BM_path_count(benchmark::State& state) {
  const auto g = build_graph({{0, 1, 1.0}, {1, 2, 0.7}, {0, 2, 1.3}});
  const auto rec = symmetric_point(g, 0, 3000.0, 3000.0);
  for (auto _ : state)
    benchmark::DoNotOptimize(path_count(g, rec.k, *rec.tree1, 0, 0));
}

}  // namespace

BENCHMARK(BM_mu_susy);
BENCHMARK(BM_marginal_full);
BENCHMARK(BM_limiting_ratio)->Arg(10)->Arg(1000);
BENCHMARK(BM_path_count);
