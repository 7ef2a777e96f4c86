#include <benchmark/benchmark.h>

#include "vrjp/simulator.hpp"

using namespace vrjp;

namespace {

WeightedGraph graph_for(int which) {
  switch (which) {
    case 0: return build_graph({{0, 1, 1.0}});
    case 1: return build_graph({{0, 1, 1.0}, {1, 2, 0.7}, {0, 2, 1.3}});
    default:
      return build_graph({{0, 1, 1.0}, {1, 2, 0.7}, {2, 3, 1.3}, {0, 3, 0.9}, {0, 2, 0.5}});
  }
}

// Jumps per second; the counter is the total of all crossing numbers.
void BM_records(benchmark::State& state, Engine engine) {
  const auto g = graph_for(static_cast<int>(state.range(0)));
  const double sigma = 50.0, sigma_prime = 20000.0;
  std::uint64_t first = 0, jumps = 0;
  for (auto _ : state) {
    auto recs = simulate_records(g, 0, sigma, sigma_prime, 1, first, 64, 1, engine);
    first += 64;
    for (const auto& r : recs) {
      for (auto k : r.k.values) jumps += k;
      for (auto k : r.k_prime.values) jumps += k;
    }
    benchmark::DoNotOptimize(recs.data());
  }
  state.counters["jumps/s"] = benchmark::Counter(static_cast<double>(jumps),
                                                 benchmark::Counter::kIsRate);
}

void BM_scalar(benchmark::State& s) { BM_records(s, Engine::Scalar); }
void BM_lanes(benchmark::State& s) {
  if (!lane_engine_supported(graph_for(static_cast<int>(s.range(0))))) {
    s.SkipWithError("lane engine not available for this graph");
    return;
  }
  BM_records(s, Engine::Lanes);
}

}  // namespace

BENCHMARK(BM_scalar)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_lanes)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
