#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "vrjp/graph.hpp"
#include "vrjp/rng.hpp"

namespace vrjp {

struct JumpEvent {
  double time;  // Y-time
  Vertex to;
};

struct JumpTrajectory {
  Vertex start = 0;
  std::vector<JumpEvent> events;
  double final_time = 0.0;
  std::vector<double> local_times_with_offset;  // L_i at final_time
};

struct ZEvent {
  double y_time;
  double z_time;
  Vertex from;
  Vertex to;
};

struct ZTrajectory {
  Vertex start = 0;
  std::vector<ZEvent> events;
  double final_time = 0.0;      // Z-time
  std::vector<double> local_times;  // l_i at final_time
};

// Exact simulation of Y from `start` (default: the graph root) up to Y-time
// t_max.
JumpTrajectory simulate_Y(const WeightedGraph& g, Xoshiro256pp& rng,
                          double t_max, Vertex start = -1);
// Same dynamics, stopped when D(t) reaches z_max.
JumpTrajectory simulate_Y_until_Z(const WeightedGraph& g, Xoshiro256pp& rng,
                                  double z_max, Vertex start = -1);

// D(t) = sum_i (L_i(t)^2 - 1), evaluated in closed form on the path.
double time_change_at(const JumpTrajectory& traj, int vertex_count, double t);
ZTrajectory time_change(const JumpTrajectory& traj, int vertex_count);

// Z local times at Z-time sigma by summing Z-sojourn lengths.
std::vector<double> z_local_times(const ZTrajectory& traj, int vertex_count,
                                  double sigma);
Vertex z_position(const ZTrajectory& traj, double sigma);
// Crossing counts of jumps with Z-time in (sigma1, sigma2].
IntegerCurrent z_crossings(const WeightedGraph& g, const ZTrajectory& traj,
                           double sigma1, double sigma2);

// Last departures in (sigma1, sigma2]; nullopt when some vertex other than
// Z_{sigma2} has no departure in the window.
std::optional<DirectedTree> last_exit_tree(const WeightedGraph& g,
                                           const ZTrajectory& traj,
                                           double sigma1, double sigma2);

struct ObservableRecord {
  double sigma = 0.0;
  double sigma_prime = 0.0;
  Vertex start = 0;
  IntegerCurrent k;        // source start, sink end1
  IntegerCurrent k_prime;  // source end1, sink end2
  std::vector<double> l;
  std::vector<double> l_prime;
  Vertex end1 = -1;
  Vertex end2 = -1;
  std::optional<DirectedTree> tree1;
  std::optional<DirectedTree> tree2;
  bool in_O = false;
};

ObservableRecord simulate_two_scales(const WeightedGraph& g, Vertex i0,
                                     double sigma, double sigma_prime,
                                     Xoshiro256pp& rng);

// Builds the record from a stored Z-trajectory using the definitions
// directly. Independent of the streaming accounting in simulate_two_scales.
ObservableRecord record_from_trajectory(const WeightedGraph& g, Vertex i0,
                                        const ZTrajectory& traj, double sigma,
                                        double sigma_prime);

bool compute_in_O(const ObservableRecord& rec);

struct RescaledObservables {
  CurrentVector kappa;
  CurrentVector kappa_prime;
  std::vector<double> s;
  std::vector<double> v;
  std::vector<double> u;
  Vertex end1 = -1;
  Vertex end2 = -1;
  DirectedTree tree1;
  DirectedTree tree2;
};

RescaledObservables rescale(const WeightedGraph& g, const ObservableRecord& rec,
                            Vertex i0);
bool truncation_event(const RescaledObservables& r, double M);

enum class Engine { Auto, Scalar, Lanes };

// Records for trajectories [first, first + count) under master_seed. Each
// trajectory uses trajectory_stream(master_seed, index), so output does not
// depend on `threads` or `engine`.
std::vector<ObservableRecord> simulate_records(
    const WeightedGraph& g, Vertex i0, double sigma, double sigma_prime,
    std::uint64_t master_seed, std::uint64_t first, std::uint64_t count,
    int threads = 1, Engine engine = Engine::Auto);

// Streaming variant; `sink(index, record)` is called from worker threads
// for disjoint index sets.
void for_each_record(
    const WeightedGraph& g, Vertex i0, double sigma, double sigma_prime,
    std::uint64_t master_seed, std::uint64_t first, std::uint64_t count,
    int threads, Engine engine,
    const std::function<void(std::uint64_t, ObservableRecord&&)>& sink);

bool lane_engine_supported(const WeightedGraph& g);

// Z local times along one trajectory at increasing Z-times.
std::vector<std::vector<double>> local_time_snapshots(
    const WeightedGraph& g, Vertex i0, const std::vector<double>& times,
    Xoshiro256pp& rng);

void write_trajectory_csv(std::ostream& out, const ZTrajectory& traj);

}  // namespace vrjp
