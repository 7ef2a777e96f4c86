#pragma once

#include <cstdint>
#include <functional>

#include "vrjp/simulator.hpp"

namespace vrjp::detail {

struct StepTables;

bool lanes_supported(int vertex_count);

// Simulates trajectories [first, first + count) eight at a time. Records are
// identical to those of the scalar engine.
void run_lanes(const WeightedGraph& g, const StepTables& t, Vertex i0,
               double sigma, double sigma_prime, std::uint64_t seed,
               std::uint64_t first, std::uint64_t count,
               const std::function<void(std::uint64_t, ObservableRecord&&)>& sink);

}  // namespace vrjp::detail
