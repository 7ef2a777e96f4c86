#pragma once

// Per-trajectory state of the streaming two-window simulation. The scalar
// engine runs advance() in a loop; the lane engine replays the fast path of
// advance() on 8 trajectories at once and calls advance() itself whenever a
// lane is near a window boundary.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "vrjp/detail/holding_time.hpp"
#include "vrjp/simulator.hpp"

namespace vrjp::detail {

struct StepTables {
  int n = 0;
  int ndir = 0;
  std::vector<std::vector<Vertex>> nbr;
  std::vector<std::vector<double>> w;
  std::vector<std::vector<int>> dir;  // directed index (i -> nbr[i][k])
  std::vector<int> dir_to;            // head vertex of each directed edge
  explicit StepTables(const WeightedGraph& g);
};

// Lanes flag themselves for the exact path this far before a boundary.
inline double boundary_threshold(double boundary) {
  return boundary - 1e-6 * boundary;
}

struct TwoScaleState {
  std::vector<double> L;
  Vertex cur = 0;
  double D = 0.0;
  double boundary = 0.0;
  double threshold = 0.0;
  int phase = 0;  // 0 first window, 1 second window, 2 done
  std::vector<std::int64_t> counts;
  std::vector<int> last_exit;
  Xoshiro256pp rng{};
  std::vector<double> lz_first;
  ObservableRecord rec;
};

void init_state(TwoScaleState& st, const StepTables& t, Vertex i0, double sigma,
                double sigma_prime, const Xoshiro256pp& rng);

// Picks the jump target from cur with a fresh uniform when deg(cur) > 1.
inline int choose_slot(const StepTables& t, Vertex cur,
                       const std::vector<double>& L, double R,
                       Xoshiro256pp& rng) {
  const auto& nb = t.nbr[cur];
  const int deg = static_cast<int>(nb.size());
  if (deg == 1) return 0;
  const double thr = uniform01(rng()) * R;
  double c = 0.0;
  for (int k = 0; k < deg; ++k) {
    c += t.w[cur][k] * L[nb[k]];
    if (c > thr) return k;
  }
  return deg - 1;
}

// Boundary handling for one sojourn of length tau; defined in simulator.cpp.
void advance_exact(const StepTables& t, TwoScaleState& st, double tau);

// One holding time and jump, given the random bits for the holding time.
// Returns false once the trajectory is complete.
inline bool advance_with(const StepTables& t, TwoScaleState& st,
                         std::uint64_t bits) {
  const auto& nb = t.nbr[st.cur];
  double R = 0.0;
  for (std::size_t k = 0; k < nb.size(); ++k) R += t.w[st.cur][k] * st.L[nb[k]];
  const double tau = holding_time<double>(bits, R);
  const double a = st.L[st.cur];
  const double dD = tau * (2.0 * a + tau);
  if (st.D + dD >= st.threshold) {
    advance_exact(t, st, tau);
    if (st.phase == 2) return false;
  } else {
    st.L[st.cur] = a + tau;
    st.D = st.D + dD;
  }
  const int k = choose_slot(t, st.cur, st.L, R, st.rng);
  const int d = t.dir[st.cur][k];
  st.counts[d] += 1;
  st.last_exit[st.cur] = d;
  st.cur = nb[k];
  return true;
}

inline bool advance(const StepTables& t, TwoScaleState& st) {
  return advance_with(t, st, st.rng());
}

}  // namespace vrjp::detail
