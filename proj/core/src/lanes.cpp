#include "lanes.hpp"

#include <array>
#include <cstring>
#include <limits>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

#include "two_scale_state.hpp"
#include "vrjp/detail/holding_time.hpp"
#include "vrjp/errors.hpp"

namespace vrjp::detail {

namespace {

constexpr int kLanes = 8;
constexpr int kBlocks = 4;
constexpr int kMaxVertices = 8;

using vd = vd8;
using vu = vu8;
using vi = vi8;

inline bool any_lane(vi m) {
#if defined(__AVX512F__)
  __m512i x;
  std::memcpy(&x, &m, sizeof x);
  return _mm512_test_epi64_mask(x, x) != 0;
#else
  for (int l = 0; l < kLanes; ++l)
    if (m[l]) return true;
  return false;
#endif
}

inline vd splat(double x) { return vd{} + x; }
inline vi splat_i(std::int64_t x) { return vi{} + x; }

inline vu rotl(vu x, int k) { return (x << k) | (x >> (64 - k)); }

struct LaneRng {
  vu s0, s1, s2, s3;
  vu next() {
    const vu r = rotl(s0 + s3, 23) + s0;
    const vu t = s1 << 17;
    s2 ^= s0;
    s3 ^= s1;
    s1 ^= s2;
    s0 ^= s3;
    s2 ^= t;
    s3 = rotl(s3, 45);
    return r;
  }
  void keep_where(vi mask, const LaneRng& other) {
    const vu m = (vu)mask;
    s0 = (s0 & m) | (other.s0 & ~m);
    s1 = (s1 & m) | (other.s1 & ~m);
    s2 = (s2 & m) | (other.s2 & ~m);
    s3 = (s3 & m) | (other.s3 & ~m);
  }
};

template <int N, bool kSingleNeighbor>
class LaneEngine {
 public:
  LaneEngine(const WeightedGraph& g, const StepTables& t, Vertex i0,
             double sigma, double sigma_prime, std::uint64_t seed)
      : t_(t), i0_(i0), sigma_(sigma), sigma_prime_(sigma_prime), seed_(seed) {
    nd_ = t.ndir;
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) W_[i][j] = g.weight(i, j);
      deg_[i] = g.degree(i);
      last_nbr_[i] = g.neighbors(i).back();
    }
    for (int d = 0; d < nd_; ++d) {
      from_[d] = g.directed(d).from;
      to_[d] = g.directed(d).to;
    }
  }

  void run(std::uint64_t first, std::uint64_t count,
           const std::function<void(std::uint64_t, ObservableRecord&&)>& sink) {
    next_index_ = first;
    end_index_ = first + count;
    live_ = 0;
    for (int b = 0; b < kBlocks; ++b)
      for (int l = 0; l < kLanes; ++l) refill(b, l);
    while (live_ > 0) {
      vi flag[kBlocks];
      for (int b = 0; b < kBlocks; ++b) flag[b] = fast_step(blk_[b]);
      for (int b = 0; b < kBlocks; ++b)
        if (any_lane(flag[b]))
          for (int l = 0; l < kLanes; ++l)
            if (flag[b][l]) slow_step(b, l, sink);
    }
  }

 private:
  struct Block {
    vd L[N];
    vi cur;
    vd D;
    vd thr;
    LaneRng rng;
    vi counts[N * (N - 1)];
    vi last[N];
    vu bits;  // holding-time bits of the last fast step
    std::array<TwoScaleState, kLanes> st;
    std::array<std::uint64_t, kLanes> index{};
    std::array<bool, kLanes> alive{};
  };

  // Loads the next trajectory into lane l of block b, or parks the lane.
  void refill(int b, int l) {
    Block& B = blk_[b];
    if (next_index_ < end_index_) {
      B.index[l] = next_index_;
      init_state(B.st[l], t_, i0_, sigma_, sigma_prime_,
                 trajectory_stream(seed_, next_index_));
      ++next_index_;
      B.alive[l] = true;
      ++live_;
      store(B, l);
    } else {
      B.alive[l] = false;
      B.thr[l] = std::numeric_limits<double>::infinity();
      B.D[l] = 0.0;
      for (int i = 0; i < N; ++i) B.L[i][l] = 1.0;
      B.cur[l] = 0;
    }
  }

  void store(Block& B, int l) {
    const auto& st = B.st[l];
    for (int i = 0; i < N; ++i) {
      B.L[i][l] = st.L[i];
      B.last[i][l] = st.last_exit[i];
    }
    B.cur[l] = st.cur;
    B.D[l] = st.D;
    B.thr[l] = st.threshold;
    B.rng.s0[l] = st.rng.s[0];
    B.rng.s1[l] = st.rng.s[1];
    B.rng.s2[l] = st.rng.s[2];
    B.rng.s3[l] = st.rng.s[3];
    for (int d = 0; d < nd_; ++d) B.counts[d][l] = st.counts[d];
  }

  void load(Block& B, int l) {
    auto& st = B.st[l];
    for (int i = 0; i < N; ++i) {
      st.L[i] = B.L[i][l];
      st.last_exit[i] = static_cast<int>(B.last[i][l]);
    }
    st.cur = static_cast<Vertex>(B.cur[l]);
    st.D = B.D[l];
    st.rng.s[0] = B.rng.s0[l];
    st.rng.s[1] = B.rng.s1[l];
    st.rng.s[2] = B.rng.s2[l];
    st.rng.s[3] = B.rng.s3[l];
    for (int d = 0; d < nd_; ++d) st.counts[d] = B.counts[d][l];
  }

  void slow_step(int b, int l,
                 const std::function<void(std::uint64_t, ObservableRecord&&)>& sink) {
    Block& B = blk_[b];
    if (!B.alive[l]) return;
    load(B, l);
    if (advance_with(t_, B.st[l], B.bits[l])) {
      store(B, l);
      return;
    }
    sink(B.index[l], std::move(B.st[l].rec));
    --live_;
    refill(b, l);
  }

  // Fast path of advance() on the lanes of one block; returns the lanes
  // that need slow_step.
  vi fast_step(Block& B) {
    vi m[N];
    for (int i = 0; i < N; ++i) m[i] = B.cur == i;
    vd a = B.L[0];
    for (int i = 1; i < N; ++i) a = m[i] ? B.L[i] : a;
    vd w[N];
    for (int j = 0; j < N; ++j) {
      w[j] = splat(W_[0][j]);
      for (int i = 1; i < N; ++i) w[j] = m[i] ? splat(W_[i][j]) : w[j];
    }
    vd R = splat(0.0);
    for (int j = 0; j < N; ++j) R = R + w[j] * B.L[j];

    B.bits = B.rng.next();
    const vd tau = holding_time<vd>(B.bits, R);
    const vd dD = tau * (2.0 * a + tau);
    const vd Dn = B.D + dD;
    const vi flag = Dn >= B.thr;
    const vi ok = ~flag;

    vi next;
    if constexpr (kSingleNeighbor) {
      next = splat_i(last_nbr_[0]);
      for (int i = 1; i < N; ++i) next = m[i] ? splat_i(last_nbr_[i]) : next;
    } else {
      vi multi = splat_i(deg_[0] > 1 ? -1 : 0);
      vi lastn = splat_i(last_nbr_[0]);
      for (int i = 1; i < N; ++i) {
        multi = m[i] ? splat_i(deg_[i] > 1 ? -1 : 0) : multi;
        lastn = m[i] ? splat_i(last_nbr_[i]) : lastn;
      }
      const vi need = ok & multi;
      next = lastn;
      if (any_lane(need)) {
        const LaneRng before2 = B.rng;
        const vu bits = B.rng.next();
        B.rng.keep_where(need, before2);
        const vd thr2 =
            __builtin_convertvector((vi)(bits >> 11), vd) * 0x1.0p-53 * R;
        vd c = splat(0.0);
        vi chosen = splat_i(-1);
        for (int j = 0; j < N; ++j) {
          c = c + w[j] * B.L[j];
          const vi hit = (w[j] > 0.0) & (c > thr2) & (chosen < 0);
          chosen = hit ? splat_i(j) : chosen;
        }
        next = need ? (chosen < 0 ? lastn : chosen) : lastn;
      }
    }

    const vd an = a + tau;
    for (int i = 0; i < N; ++i) B.L[i] = (ok & m[i]) ? an : B.L[i];
    B.D = ok ? Dn : B.D;
    for (int d = 0; d < nd_; ++d) {
      const vi hit = ok & m[from_[d]] & (next == to_[d]);
      B.counts[d] -= hit;
      B.last[from_[d]] = hit ? splat_i(d) : B.last[from_[d]];
    }
    B.cur = ok ? next : B.cur;
    return flag;
  }

  const StepTables& t_;
  Vertex i0_;
  double sigma_, sigma_prime_;
  std::uint64_t seed_;
  int nd_ = 0;
  double W_[N][N]{};
  int deg_[N]{};
  int last_nbr_[N]{};
  int from_[N * (N - 1)]{};
  int to_[N * (N - 1)]{};

  std::array<Block, kBlocks> blk_;
  std::uint64_t next_index_ = 0, end_index_ = 0;
  int live_ = 0;
};

// Two vertices joined by one edge: every sojourn ends with a jump to the
// other vertex, so a lane keeps L at the current vertex (A), L at the other
// vertex (B) and the number of jumps in the current window.
class PairLaneEngine {
 public:
  PairLaneEngine(const WeightedGraph& g, const StepTables& t, Vertex i0,
                 double sigma, double sigma_prime, std::uint64_t seed)
      : t_(t), i0_(i0), sigma_(sigma), sigma_prime_(sigma_prime), seed_(seed),
        W_(g.edge(0).w) {}

  void run(std::uint64_t first, std::uint64_t count,
           const std::function<void(std::uint64_t, ObservableRecord&&)>& sink) {
    next_index_ = first;
    end_index_ = first + count;
    live_ = 0;
    for (int b = 0; b < kBlocks; ++b)
      for (int l = 0; l < kLanes; ++l) refill(b, l);
    while (live_ > 0) {
      vi flag[kBlocks];
      for (int b = 0; b < kBlocks; ++b) flag[b] = fast_step(blk_[b]);
      for (int b = 0; b < kBlocks; ++b)
        if (any_lane(flag[b]))
          for (int l = 0; l < kLanes; ++l)
            if (flag[b][l]) slow_step(b, l, sink);
    }
  }

 private:
  struct Block {
    vd A, B, D, thr;
    vi jumps;  // also counts a flagged step, which slow_step takes back
    LaneRng rng;
    vu bits;
    std::array<TwoScaleState, kLanes> st;
    std::array<std::uint64_t, kLanes> index{};
    std::array<bool, kLanes> alive{};
  };

  static Vertex window_start(const TwoScaleState& st) {
    return st.phase == 0 ? st.rec.start : st.rec.end1;
  }

  void refill(int b, int l) {
    Block& B = blk_[b];
    if (next_index_ < end_index_) {
      B.index[l] = next_index_;
      init_state(B.st[l], t_, i0_, sigma_, sigma_prime_,
                 trajectory_stream(seed_, next_index_));
      ++next_index_;
      B.alive[l] = true;
      ++live_;
      store(B, l);
    } else {
      B.alive[l] = false;
      B.thr[l] = std::numeric_limits<double>::infinity();
      B.D[l] = 0.0;
      B.A[l] = B.B[l] = 1.0;
    }
  }

  void store(Block& B, int l) {
    const auto& st = B.st[l];
    B.A[l] = st.L[st.cur];
    B.B[l] = st.L[1 - st.cur];
    B.jumps[l] = st.counts[0] + st.counts[1];
    B.D[l] = st.D;
    B.thr[l] = st.threshold;
    B.rng.s0[l] = st.rng.s[0];
    B.rng.s1[l] = st.rng.s[1];
    B.rng.s2[l] = st.rng.s[2];
    B.rng.s3[l] = st.rng.s[3];
  }

  void load(Block& B, int l) {
    auto& st = B.st[l];
    // n alternating jumps from the window's first vertex s
    const Vertex s = window_start(st);
    const std::int64_t n = B.jumps[l];
    st.cur = s ^ static_cast<Vertex>(n & 1);
    st.L[st.cur] = B.A[l];
    st.L[1 - st.cur] = B.B[l];
    st.D = B.D[l];
    st.rng.s[0] = B.rng.s0[l];
    st.rng.s[1] = B.rng.s1[l];
    st.rng.s[2] = B.rng.s2[l];
    st.rng.s[3] = B.rng.s3[l];
    const int out = t_.dir[s][0], back = t_.dir[1 - s][0];
    st.counts[out] = (n + 1) / 2;
    st.counts[back] = n / 2;
    st.last_exit[s] = n >= 1 ? out : -1;
    st.last_exit[1 - s] = n >= 2 ? back : -1;
  }

  void slow_step(int b, int l,
                 const std::function<void(std::uint64_t, ObservableRecord&&)>& sink) {
    Block& B = blk_[b];
    if (!B.alive[l]) return;
    B.jumps[l] -= 1;
    load(B, l);
    if (advance_with(t_, B.st[l], B.bits[l])) {
      store(B, l);
      return;
    }
    sink(B.index[l], std::move(B.st[l].rec));
    --live_;
    refill(b, l);
  }

  vi fast_step(Block& B) {
    const vd R = B.B * W_;
    B.bits = B.rng.next();
    const vd tau = holding_time<vd>(B.bits, R);
    const vd dD = tau * (2.0 * B.A + tau);
    const vd Dn = B.D + dD;
    const vi flag = Dn >= B.thr;
    const vi ok = ~flag;
    const vd an = B.A + tau;
    B.A = ok ? B.B : B.A;
    B.B = ok ? an : B.B;
    B.D = ok ? Dn : B.D;
    B.jumps += 1;
    return flag;
  }

  const StepTables& t_;
  Vertex i0_;
  double sigma_, sigma_prime_;
  std::uint64_t seed_;
  double W_;
  std::array<Block, kBlocks> blk_;
  std::uint64_t next_index_ = 0, end_index_ = 0;
  int live_ = 0;
};

template <int N>
void dispatch(const WeightedGraph& g, const StepTables& t, Vertex i0,
              double sigma, double sigma_prime, std::uint64_t seed,
              std::uint64_t first, std::uint64_t count,
              const std::function<void(std::uint64_t, ObservableRecord&&)>& sink) {
  if constexpr (N == 2) {
    PairLaneEngine e(g, t, i0, sigma, sigma_prime, seed);
    e.run(first, count, sink);
  } else {
    LaneEngine<N, false> e(g, t, i0, sigma, sigma_prime, seed);
    e.run(first, count, sink);
  }
}

}  // namespace

bool lanes_supported(int n) { return n >= 2 && n <= kMaxVertices; }

void run_lanes(const WeightedGraph& g, const StepTables& t, Vertex i0,
               double sigma, double sigma_prime, std::uint64_t seed,
               std::uint64_t first, std::uint64_t count,
               const std::function<void(std::uint64_t, ObservableRecord&&)>& sink) {
  switch (g.vertex_count()) {
    case 2: return dispatch<2>(g, t, i0, sigma, sigma_prime, seed, first, count, sink);
    case 3: return dispatch<3>(g, t, i0, sigma, sigma_prime, seed, first, count, sink);
    case 4: return dispatch<4>(g, t, i0, sigma, sigma_prime, seed, first, count, sink);
    case 5: return dispatch<5>(g, t, i0, sigma, sigma_prime, seed, first, count, sink);
    case 6: return dispatch<6>(g, t, i0, sigma, sigma_prime, seed, first, count, sink);
    case 7: return dispatch<7>(g, t, i0, sigma, sigma_prime, seed, first, count, sink);
    case 8: return dispatch<8>(g, t, i0, sigma, sigma_prime, seed, first, count, sink);
    default: throw PreconditionViolation("lane engine supports 2..8 vertices");
  }
}

}  // namespace vrjp::detail
