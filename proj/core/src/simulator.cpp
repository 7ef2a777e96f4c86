#include "vrjp/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "lanes.hpp"
#include "two_scale_state.hpp"
#include "vrjp/errors.hpp"

namespace vrjp {

namespace detail {

StepTables::StepTables(const WeightedGraph& g)
    : n(g.vertex_count()), ndir(g.directed_edge_count()) {
  dir_to.resize(ndir);
  for (int d = 0; d < ndir; ++d) dir_to[d] = g.directed(d).to;
  nbr.resize(n);
  w.resize(n);
  dir.resize(n);
  for (Vertex i = 0; i < n; ++i)
    for (Vertex j : g.neighbors(i)) {
      nbr[i].push_back(j);
      w[i].push_back(g.weight(i, j));
      dir[i].push_back(g.directed_index(i, j));
    }
}

void init_state(TwoScaleState& st, const StepTables& t, Vertex i0, double sigma,
                double sigma_prime, const Xoshiro256pp& rng) {
  st.L.assign(t.n, 1.0);
  st.cur = i0;
  st.D = 0.0;
  st.boundary = sigma;
  st.threshold = boundary_threshold(sigma);
  st.phase = 0;
  st.counts.assign(t.ndir, 0);
  st.last_exit.assign(t.n, -1);
  st.rng = rng;
  st.lz_first.clear();
  st.rec = ObservableRecord{};
  st.rec.sigma = sigma;
  st.rec.sigma_prime = sigma_prime;
  st.rec.start = i0;
}

namespace {

std::optional<DirectedTree> tree_from_last_exits(const StepTables& t,
                                                 const std::vector<int>& last,
                                                 Vertex root) {
  DirectedTree tr;
  tr.root = root;
  tr.parent.assign(t.n, -1);
  for (Vertex i = 0; i < t.n; ++i) {
    if (i == root) continue;
    if (last[i] < 0) return std::nullopt;
    tr.parent[i] = t.dir_to[last[i]];
    tr.undirected_shadow.push_back(last[i] / 2);
  }
  std::sort(tr.undirected_shadow.begin(), tr.undirected_shadow.end());
  return tr;
}

void close_window(const StepTables& t, TwoScaleState& st) {
  const Vertex cur = st.cur;
  auto& rec = st.rec;
  if (st.phase == 0) {
    std::vector<double> lz(t.n);
    double others = 0.0;
    for (Vertex i = 0; i < t.n; ++i)
      if (i != cur) {
        lz[i] = st.L[i] * st.L[i] - 1.0;
        others += lz[i];
      }
    lz[cur] = rec.sigma - others;
    rec.l = lz;
    rec.k.values = st.counts;
    rec.k.source = rec.start;
    rec.k.sink = cur;
    rec.end1 = cur;
    rec.tree1 = tree_from_last_exits(t, st.last_exit, cur);
    st.lz_first = std::move(lz);
    std::fill(st.counts.begin(), st.counts.end(), 0);
    std::fill(st.last_exit.begin(), st.last_exit.end(), -1);
    st.phase = 1;
    st.boundary = rec.sigma + rec.sigma_prime;
    st.threshold = boundary_threshold(st.boundary);
  } else {
    std::vector<double> lp(t.n);
    double others = 0.0;
    for (Vertex i = 0; i < t.n; ++i)
      if (i != cur) {
        lp[i] = (st.L[i] * st.L[i] - 1.0) - st.lz_first[i];
        others += lp[i];
      }
    lp[cur] = rec.sigma_prime - others;
    rec.l_prime = std::move(lp);
    rec.k_prime.values = st.counts;
    rec.k_prime.source = rec.end1;
    rec.k_prime.sink = cur;
    rec.end2 = cur;
    rec.tree2 = tree_from_last_exits(t, st.last_exit, cur);
    rec.in_O = compute_in_O(rec);
    st.phase = 2;
    st.threshold = std::numeric_limits<double>::infinity();
  }
}

}  // namespace

void advance_exact(const StepTables& t, TwoScaleState& st, double tau) {
  const double a = st.L[st.cur];
  double fresh = 0.0;
  for (Vertex i = 0; i < t.n; ++i) fresh += st.L[i] * st.L[i] - 1.0;
  double base = a, left = tau, now = fresh;
  while (st.phase < 2) {
    const double need = st.boundary - now;
    if (left * (2.0 * base + left) < need) break;
    double ts = need > 0.0 ? need / (base + std::sqrt(base * base + need)) : 0.0;
    ts = std::min(ts, left);
    st.L[st.cur] = base + ts;
    now = st.boundary;
    close_window(t, st);
    if (st.phase == 2) return;
    base += ts;
    left -= ts;
  }
  st.L[st.cur] = a + tau;
  st.D = fresh + tau * (2.0 * a + tau);
}

}  // namespace detail

using detail::StepTables;

ObservableRecord simulate_two_scales(const WeightedGraph& g, Vertex i0,
                                     double sigma, double sigma_prime,
                                     Xoshiro256pp& rng) {
  if (!(sigma > 0.0) || !(sigma_prime > 0.0))
    throw PreconditionViolation("sigma and sigma_prime must be positive");
  StepTables t(g);
  detail::TwoScaleState st;
  detail::init_state(st, t, i0, sigma, sigma_prime, rng);
  while (detail::advance(t, st)) {
  }
  rng = st.rng;
  return std::move(st.rec);
}

bool compute_in_O(const ObservableRecord& rec) {
  if (!rec.tree1 || !rec.tree2) return false;
  for (double x : rec.l)
    if (!(x > 0.0)) return false;
  for (double x : rec.l_prime)
    if (!(x > 0.0)) return false;
  return true;
}

namespace {

struct YRunner {
  const StepTables& t;
  Xoshiro256pp& rng;
  std::vector<double> L;
  Vertex cur;
  double time = 0.0;
  JumpTrajectory traj;

  YRunner(const StepTables& tt, Xoshiro256pp& r, Vertex start)
      : t(tt), rng(r), L(tt.n, 1.0), cur(start) {
    traj.start = start;
  }
  // Draws a holding time; returns {R, tau}.
  std::pair<double, double> draw() {
    double R = 0.0;
    for (std::size_t k = 0; k < t.nbr[cur].size(); ++k)
      R += t.w[cur][k] * L[t.nbr[cur][k]];
    return {R, detail::holding_time<double>(rng(), R)};
  }
  void jump(double R, double tau) {
    L[cur] = L[cur] + tau;
    time += tau;
    int k = detail::choose_slot(t, cur, L, R, rng);
    cur = t.nbr[cur][k];
    traj.events.push_back({time, cur});
  }
  JumpTrajectory finish() {
    traj.final_time = time;
    traj.local_times_with_offset = L;
    return std::move(traj);
  }
};

}  // namespace

JumpTrajectory simulate_Y(const WeightedGraph& g, Xoshiro256pp& rng,
                          double t_max, Vertex start) {
  if (!(t_max > 0.0)) throw PreconditionViolation("t_max must be positive");
  StepTables t(g);
  YRunner y(t, rng, start < 0 ? g.root() : start);
  for (;;) {
    auto [R, tau] = y.draw();
    if (y.time + tau >= t_max) {
      y.L[y.cur] += t_max - y.time;
      y.time = t_max;
      return y.finish();
    }
    y.jump(R, tau);
  }
}

JumpTrajectory simulate_Y_until_Z(const WeightedGraph& g, Xoshiro256pp& rng,
                                  double z_max, Vertex start) {
  if (!(z_max > 0.0)) throw PreconditionViolation("z_max must be positive");
  StepTables t(g);
  YRunner y(t, rng, start < 0 ? g.root() : start);
  for (;;) {
    auto [R, tau] = y.draw();
    double D = 0.0;
    for (double L : y.L) D += L * L - 1.0;
    const double a = y.L[y.cur];
    const double need = z_max - D;
    if (tau * (2.0 * a + tau) >= need) {
      const double ts = need / (a + std::sqrt(a * a + need));
      y.L[y.cur] = a + ts;
      y.time += ts;
      return y.finish();
    }
    y.jump(R, tau);
  }
}

double time_change_at(const JumpTrajectory& traj, int n, double t) {
  std::vector<double> L(n, 1.0);
  Vertex cur = traj.start;
  double prev = 0.0;
  for (const auto& ev : traj.events) {
    if (ev.time > t) break;
    L[cur] += ev.time - prev;
    prev = ev.time;
    cur = ev.to;
  }
  L[cur] += std::max(0.0, t - prev);
  double D = 0.0;
  for (double x : L) D += x * x - 1.0;
  return D;
}

ZTrajectory time_change(const JumpTrajectory& traj, int n) {
  ZTrajectory z;
  z.start = traj.start;
  std::vector<double> L(n, 1.0);
  Vertex cur = traj.start;
  double prev = 0.0, D = 0.0;
  for (const auto& ev : traj.events) {
    const double tau = ev.time - prev;
    const double a = L[cur];
    D += tau * (2.0 * a + tau);
    L[cur] = a + tau;
    z.events.push_back({ev.time, D, cur, ev.to});
    prev = ev.time;
    cur = ev.to;
  }
  const double tau = traj.final_time - prev;
  D += tau * (2.0 * L[cur] + tau);
  L[cur] += tau;
  z.final_time = D;
  z.local_times.resize(n);
  for (int i = 0; i < n; ++i) z.local_times[i] = L[i] * L[i] - 1.0;
  return z;
}

std::vector<double> z_local_times(const ZTrajectory& traj, int n, double sigma) {
  std::vector<double> l(n, 0.0);
  Vertex cur = traj.start;
  double prev = 0.0;
  for (const auto& ev : traj.events) {
    if (ev.z_time > sigma) break;
    l[cur] += ev.z_time - prev;
    prev = ev.z_time;
    cur = ev.to;
  }
  l[cur] += sigma - prev;
  return l;
}

Vertex z_position(const ZTrajectory& traj, double sigma) {
  Vertex cur = traj.start;
  for (const auto& ev : traj.events) {
    if (ev.z_time > sigma) break;
    cur = ev.to;
  }
  return cur;
}

IntegerCurrent z_crossings(const WeightedGraph& g, const ZTrajectory& traj,
                           double sigma1, double sigma2) {
  IntegerCurrent k;
  k.values.assign(g.directed_edge_count(), 0);
  k.source = z_position(traj, sigma1);
  k.sink = z_position(traj, sigma2);
  for (const auto& ev : traj.events)
    if (ev.z_time > sigma1 && ev.z_time <= sigma2)
      k.values[g.directed_index(ev.from, ev.to)] += 1;
  return k;
}

std::optional<DirectedTree> last_exit_tree(const WeightedGraph& g,
                                           const ZTrajectory& traj,
                                           double sigma1, double sigma2) {
  const int n = g.vertex_count();
  const Vertex end = z_position(traj, sigma2);
  std::vector<Vertex> parent(n, -1);
  for (const auto& ev : traj.events)
    if (ev.z_time > sigma1 && ev.z_time <= sigma2) parent[ev.from] = ev.to;
  DirectedTree t;
  t.root = end;
  t.parent.assign(n, -1);
  for (Vertex i = 0; i < n; ++i) {
    if (i == end) continue;
    if (parent[i] < 0) return std::nullopt;
    t.parent[i] = parent[i];
    t.undirected_shadow.push_back(g.edge_index(i, parent[i]));
  }
  std::sort(t.undirected_shadow.begin(), t.undirected_shadow.end());
  return t;
}

ObservableRecord record_from_trajectory(const WeightedGraph& g, Vertex i0,
                                        const ZTrajectory& traj, double sigma,
                                        double sigma_prime) {
  const int n = g.vertex_count();
  ObservableRecord rec;
  rec.sigma = sigma;
  rec.sigma_prime = sigma_prime;
  rec.start = i0;
  rec.l = z_local_times(traj, n, sigma);
  auto total = z_local_times(traj, n, sigma + sigma_prime);
  rec.l_prime.resize(n);
  for (int i = 0; i < n; ++i) rec.l_prime[i] = total[i] - rec.l[i];
  rec.k = z_crossings(g, traj, -1.0, sigma);
  rec.k.source = i0;
  rec.k_prime = z_crossings(g, traj, sigma, sigma + sigma_prime);
  rec.end1 = z_position(traj, sigma);
  rec.end2 = z_position(traj, sigma + sigma_prime);
  rec.tree1 = last_exit_tree(g, traj, -1.0, sigma);
  rec.tree2 = last_exit_tree(g, traj, sigma, sigma + sigma_prime);
  rec.in_O = compute_in_O(rec);
  return rec;
}

RescaledObservables rescale(const WeightedGraph& g, const ObservableRecord& rec,
                            Vertex i0) {
  const int n = g.vertex_count();
  for (int i = 0; i < n; ++i)
    if (!(rec.l[i] > 0.0) || !(rec.l_prime[i] > 0.0))
      throw NotInO("local time is zero at vertex " + std::to_string(i));
  if (!rec.tree1 || !rec.tree2) throw NotInO("last-exit tree is incomplete");
  RescaledObservables r;
  r.s.assign(n, 0.0);
  r.v.assign(n, 0.0);
  r.u.assign(n, 0.0);
  const double l0 = rec.l[i0], lp0 = rec.l_prime[i0];
  const double sq0 = std::sqrt(l0), sqp0 = std::sqrt(lp0);
  for (int i = 0; i < n; ++i) {
    if (i == i0) continue;
    r.v[i] = 0.5 * std::log(rec.l[i] / l0);
    r.u[i] = 0.5 * std::log(rec.l_prime[i] / lp0);
    r.s[i] = sq0 * (r.u[i] - r.v[i]);
  }
  const int nd = g.directed_edge_count();
  r.kappa.values.resize(nd);
  r.kappa_prime.values.resize(nd);
  for (int d = 0; d < nd; ++d) {
    auto [i, j] = g.directed(d);
    const double w = g.directed_weight(d);
    r.kappa.values[d] =
        (rec.k.values[d] - 0.5 * w * std::sqrt(rec.l[i] * rec.l[j])) / sq0;
    r.kappa_prime.values[d] =
        (rec.k_prime.values[d] -
         0.5 * w * std::sqrt(rec.l_prime[i] * rec.l_prime[j])) /
        sqp0;
  }
  r.end1 = rec.end1;
  r.end2 = rec.end2;
  r.tree1 = *rec.tree1;
  r.tree2 = *rec.tree2;
  return r;
}

bool truncation_event(const RescaledObservables& r, double M) {
  auto ok = [M](const std::vector<double>& xs) {
    for (double x : xs)
      if (!(std::abs(x) <= M)) return false;
    return true;
  };
  return ok(r.kappa.values) && ok(r.kappa_prime.values) && ok(r.s) &&
         ok(r.u) && ok(r.v);
}

bool lane_engine_supported(const WeightedGraph& g) {
  return detail::lanes_supported(g.vertex_count());
}

void for_each_record(
    const WeightedGraph& g, Vertex i0, double sigma, double sigma_prime,
    std::uint64_t master_seed, std::uint64_t first, std::uint64_t count,
    int threads, Engine engine,
    const std::function<void(std::uint64_t, ObservableRecord&&)>& sink) {
  if (!(sigma > 0.0) || !(sigma_prime > 0.0))
    throw PreconditionViolation("sigma and sigma_prime must be positive");
  const bool lanes = engine == Engine::Lanes ||
                     (engine == Engine::Auto && lane_engine_supported(g));
  if (lanes && !lane_engine_supported(g))
    throw PreconditionViolation("lane engine supports at most 8 vertices");
  const StepTables t(g);
  constexpr std::uint64_t kChunk = 512;
  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::uint64_t c0 = next.fetch_add(kChunk);
      if (c0 >= count) return;
      const std::uint64_t c1 = std::min(count, c0 + kChunk);
      if (lanes) {
        detail::run_lanes(g, t, i0, sigma, sigma_prime, master_seed, first + c0,
                          c1 - c0, sink);
      } else {
        detail::TwoScaleState st;
        for (std::uint64_t idx = first + c0; idx < first + c1; ++idx) {
          detail::init_state(st, t, i0, sigma, sigma_prime,
                             trajectory_stream(master_seed, idx));
          while (detail::advance(t, st)) {
          }
          sink(idx, std::move(st.rec));
        }
      }
    }
  };
  threads = std::max(1, threads);
  if (threads == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

std::vector<ObservableRecord> simulate_records(
    const WeightedGraph& g, Vertex i0, double sigma, double sigma_prime,
    std::uint64_t master_seed, std::uint64_t first, std::uint64_t count,
    int threads, Engine engine) {
  std::vector<ObservableRecord> out(count);
  for_each_record(g, i0, sigma, sigma_prime, master_seed, first, count, threads,
                  engine, [&](std::uint64_t idx, ObservableRecord&& r) {
                    out[idx - first] = std::move(r);
                  });
  return out;
}

std::vector<std::vector<double>> local_time_snapshots(
    const WeightedGraph& g, Vertex i0, const std::vector<double>& times,
    Xoshiro256pp& rng) {
  if (times.empty()) return {};
  if (!std::is_sorted(times.begin(), times.end()))
    throw PreconditionViolation("snapshot times must be increasing");
  auto y = simulate_Y_until_Z(g, rng, times.back(), i0);
  auto z = time_change(y, g.vertex_count());
  std::vector<std::vector<double>> out;
  for (double s : times) out.push_back(z_local_times(z, g.vertex_count(), s));
  return out;
}

void write_trajectory_csv(std::ostream& out, const ZTrajectory& traj) {
  const auto old = out.precision(17);
  out << "event_index,Y_time,Z_time,from,to\n";
  for (std::size_t k = 0; k < traj.events.size(); ++k) {
    const auto& ev = traj.events[k];
    out << k << ',' << ev.y_time << ',' << ev.z_time << ',' << ev.from << ','
        << ev.to << '\n';
  }
  out.precision(old);
}

}  // namespace vrjp
