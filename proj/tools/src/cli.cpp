#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"

#include "vrjp/cli.hpp"
#include "vrjp/densities.hpp"
#include "vrjp/errors.hpp"
#include "vrjp/oracles.hpp"

namespace vrjp {

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("--config", "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void print_error(const std::string& kind, const std::string& msg, json extra = {}) {
  json j = {{"error", kind}, {"message", msg}};
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  std::cerr << j.dump() << "\n";
}

int resolve_threads(int from_config, std::optional<int> flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("VRJP_SIGMA_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1 || v > 4096)
      throw ValidationError("VRJP_SIGMA_THREADS", "expected a positive integer");
    return static_cast<int>(v);
  }
  return from_config;
}

std::filesystem::path prepare_out(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p);
  if (!f) throw Error("cannot write " + p.string());
  f << s;
}

void print_report_line(const TestReport& r) {
  std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << "  statistic=" << r.statistic;
  if (!std::isnan(r.p_value)) std::cout << " p=" << r.p_value;
  if (!r.note.empty()) std::cout << "  (" << r.note << ")";
  std::cout << "\n";
}

// ---- verify ----------------------------------------------------------------

TestReport check(const std::string& name, bool ok, double statistic, double tol,
                 const std::string& note = "") {
  TestReport r;
  r.name = name;
  r.passed = ok;
  r.statistic = statistic;
  r.alpha = tol;
  r.note = note;
  return r;
}

struct Fixture {
  std::string name;
  WeightedGraph g;
};

std::vector<Fixture> fixtures() {
  return {{"K2", build_graph({{0, 1, 1.0}})},
          {"P3", build_graph({{0, 1, 1.0}, {1, 2, 0.8}})},
          {"triangle", build_graph({{0, 1, 1.0}, {1, 2, 0.7}, {0, 2, 1.3}})},
          {"C4", build_graph({{0, 1, 1.0}, {1, 2, 0.9}, {2, 3, 1.1}, {0, 3, 0.6}})},
          {"C4_chord",
           build_graph({{0, 1, 1.0}, {1, 2, 0.7}, {2, 3, 1.3}, {0, 3, 0.9}, {0, 2, 0.5}})}};
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

std::vector<TestReport> verify_suite(const std::vector<Fixture>& fx) {
  std::vector<TestReport> out;
  std::mt19937_64 rng(20240611);
  std::normal_distribution<double> normal;
  const auto& k2 = fx[0].g;
  const auto& tri = fx[2].g;

  {
    const double z = susy_normalization(k2, 1e-8).value;
    out.push_back(check("normalization_K2", std::abs(z - 1) <= 1e-6, z, 1e-6));
    const double zt = susy_normalization(tri, 1e-5).value;
    out.push_back(check("normalization_triangle", std::abs(zt - 1) <= 1e-3, zt, 1e-3));
  }
  for (const auto& f : fx) {
    const auto& g = f.g;
    const int n = g.vertex_count();
    double worst = 0.0;
    const auto trees = enumerate_spanning_trees(g);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> s(n, 0.0), u(n, 0.0);
      for (int i = 0; i < n; ++i)
        if (i != g.root()) {
          s[i] = normal(rng);
          u[i] = normal(rng);
        }
      for (const auto& tp : trees) {
        double acc = 0.0;
        for (Vertex a = 0; a < n; ++a)
          for (Vertex b = 0; b < n; ++b)
            for (const auto& t : trees)
              acc += marginal_full_density(g, s, u, a, b, t, tp).value();
        worst = std::max(worst, rel_err(acc, mu_susy_density(g, s, u, tp).value()));
      }
    }
    out.push_back(check("marginalization_" + f.name, worst <= 1e-12, worst, 1e-12));

    std::vector<double> w;
    for (int e = 0; e < g.edge_count(); ++e) w.push_back(std::exp(normal(rng)));
    const double cf = gaussian_current_integral(g, w);
    const double cs = gaussian_current_integral_cycle_space(g, w, 1e-9).value;
    out.push_back(check("gaussian_current_" + f.name, rel_err(cf, cs) <= 1e-6,
                        rel_err(cf, cs), 1e-6));
  }
  for (int fi : {0, 1, 2}) {
    const auto& g = fx[fi].g;
    const int nd = g.directed_edge_count();
    std::uint64_t mismatches = 0, cases = 0;
    std::vector<std::int64_t> k(nd, 0);
    std::function<void(int, int)> rec = [&](int d, int left) {
      if (d == nd) {
        for (Vertex i1 = 0; i1 < g.vertex_count(); ++i1) {
          IntegerCurrent kc;
          kc.values = k;
          kc.source = g.root();
          kc.sink = i1;
          if (!check_kirchhoff(g, kc, g.root(), i1)) continue;
          const auto en = enumerate_paths(g, g.root(), i1, kc);
          for (const auto& t : directed_trees_toward(g, i1)) {
            ++cases;
            const auto it = en.by_tree.find(t.parent);
            const std::uint64_t e = it == en.by_tree.end() ? 0 : it->second;
            if (path_count(g, kc, t, g.root(), i1) != e) ++mismatches;
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
    rec(0, 8);
    out.push_back(check("path_count_" + fx[fi].name, mismatches == 0,
                        static_cast<double>(mismatches), 0,
                        std::to_string(cases) + " (k, tree) cases, sum k <= 8"));
  }
  for (int fi : {0, 2}) {
    const auto& g = fx[fi].g;
    std::uniform_real_distribution<double> U(0.1, 1.0);
    double worst = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<double> l(g.vertex_count()), lp(g.vertex_count());
      double a = 0.0, b = 0.0;
      for (int i = 0; i < g.vertex_count(); ++i) {
        l[i] = 10.0 * U(rng);
        lp[i] = 1000.0 * U(rng);
        a += l[i];
        b += lp[i];
      }
      worst = std::max(worst, jacobian_check(l, lp, a, b, g.root()).relative_error);
    }
    out.push_back(check("jacobian_" + fx[fi].name, worst <= 1e-5, worst, 1e-5));
  }
  {
    const int n = tri.vertex_count();
    std::vector<double> s(n, 0.0), u(n, 0.0), v(n, 0.0);
    for (int i = 1; i < n; ++i) {
      s[i] = normal(rng);
      u[i] = normal(rng);
      v[i] = normal(rng);
    }
    const auto trees = enumerate_spanning_trees(tri);
    const double a = mu_susy_density(tri, s, u, trees[0]).log_value;
    const double b = hp_log_mu_susy_density(tri, s, u, trees[0]);
    out.push_back(check("high_precision_mu_susy", std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)),
                        std::abs(a - b), 1e-12));
    CurrentVector kap, kapp;
    for (int d = 0; d < tri.directed_edge_count(); ++d) {
      kap.values.push_back(normal(rng));
      kapp.values.push_back(normal(rng));
    }
    const double c = rho_big(tri, kap, kapp, s, v, u, 1, 2, trees[1], trees[2]).log_value;
    const double e = hp_log_rho_big(tri, kap, kapp, s, v, u, 1, 2, trees[1], trees[2]);
    out.push_back(check("high_precision_rho_big", rel_err(std::exp(c - e), 1.0) <= 1e-12,
                        std::abs(c - e), 1e-12));
  }
  return out;
}

// ---- subcommands -----------------------------------------------------------

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

RunConfig load_config(const Common& c) {
  RunConfig cfg = parse_config(read_file(c.config));
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.out = *c.out;
  cfg.threads = resolve_threads(cfg.threads, c.threads);
  return cfg;
}

int cmd_simulate(const Common& c) {
  const RunConfig cfg = load_config(c);
  const WeightedGraph g = load_graph(cfg);
  const auto dir = prepare_out(cfg.out);
  write_text(dir / "config.json", serialize_config(cfg) + "\n");
  std::ofstream f(dir / "observables.csv");
  if (!f) throw Error("cannot write observables.csv");
  write_observables_header(f, g);
  // Blocks keep memory bounded; rows stay in trajectory order.
  constexpr std::uint64_t kBlock = 4096;
  for (std::uint64_t first = 0; first < cfg.n; first += kBlock) {
    const auto count = std::min(kBlock, cfg.n - first);
    const auto recs = simulate_records(g, cfg.i0, cfg.sigma, cfg.sigma_prime, cfg.seed,
                                       first, count, cfg.threads);
    for (std::uint64_t k = 0; k < count; ++k)
      write_observables_row(f, g, cfg.i0, first + k, recs[k]);
  }
  std::cout << "wrote " << (dir / "observables.csv").string() << " (" << cfg.n
            << " trajectories)\n";
  return kExitOk;
}

int cmd_density(const Common& c) {
  const RunConfig cfg = load_config(c);
  if (cfg.density.is_null()) throw ValidationError("density", "required for this command");
  const WeightedGraph g = load_graph(cfg);
  const auto dir = prepare_out(cfg.out);
  std::ostringstream csv;
  evaluate_densities(csv, g, cfg.density);
  write_text(dir / "density.csv", csv.str());
  std::cout << csv.str();
  return kExitOk;
}

int cmd_verify(const Common& c) {
  auto fx = fixtures();
  std::optional<std::filesystem::path> dir;
  if (!c.config.empty()) {
    const RunConfig cfg = load_config(c);
    fx.push_back({"config", load_graph(cfg)});
    dir = prepare_out(cfg.out);
  } else if (c.out) {
    dir = prepare_out(*c.out);
  }
  const auto reports = verify_suite(fx);
  bool ok = true;
  json arr = json::array();
  for (const auto& r : reports) {
    print_report_line(r);
    ok = ok && r.passed;
    arr.push_back(report_to_json(r));
  }
  if (dir) write_text(*dir / "verify.json", json{{"reports", arr}, {"passed", ok}}.dump(2) + "\n");
  return ok ? kExitOk : kExitFail;
}

int cmd_converge(const Common& c) {
  const RunConfig cfg = load_config(c);
  const WeightedGraph g = load_graph(cfg);
  const auto dir = prepare_out(cfg.out);
  HarnessOptions opt;
  opt.alpha = cfg.alpha;
  opt.quadrature_tolerance = cfg.quadrature_tolerance;
  LimitLaw law(g, opt);

  EnsembleConfig ec;
  ec.i0 = cfg.i0;
  ec.sigma = cfg.sigma;
  ec.sigma_prime = cfg.sigma_prime;
  ec.n = cfg.n;
  ec.seed = cfg.seed;
  ec.threads = cfg.threads;
  ec.single_window = cfg.single_window;
  const auto t0 = std::chrono::steady_clock::now();
  const EnsembleResult ens = run_ensemble(g, ec);
  const double sim_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::vector<TestReport> reports;
  if (!cfg.single_window) reports.push_back(in_O_report(ens, 0.99));
  for (auto& r : compare_single_time(ens, law)) reports.push_back(r);
  if (!cfg.single_window)
    for (auto& r : compare_fluctuations(ens, law)) reports.push_back(r);
  for (auto& r : crossing_mean_reports(ens, g)) reports.push_back(r);
  reports.push_back(density_ratio_scan(g, cfg.i0, cfg.sigma_list, symmetric_point,
                                       cfg.schedule_exponent)
                        .report);
  if (cfg.calibration_repetitions > 0) {
    std::vector<std::uint64_t> seeds;
    for (int k = 1; k <= cfg.calibration_repetitions; ++k) seeds.push_back(k);
    const auto cal = null_calibration(law, cfg.calibration_n ? cfg.calibration_n : cfg.n,
                                      seeds, !cfg.single_window);
    for (const auto& [name, t] : cal.tally) {
      TestReport r;
      r.name = "null_" + name;
      r.statistic = static_cast<double>(t.first) / t.second;
      r.passed = t.first >= cal.required_fraction * t.second;
      r.alpha = cal.required_fraction;
      r.sample_size = t.second;
      r.note = std::to_string(t.first) + "/" + std::to_string(t.second) + " repetitions pass";
      reports.push_back(r);
    }
  }

  std::uint64_t truncated = 0, accepted = 0;
  for (const auto& s : ens.samples) {
    if (!s) continue;
    ++accepted;
    if (!cfg.single_window && truncation_event(*s, cfg.M)) ++truncated;
  }
  bool ok = true;
  json arr = json::array();
  for (const auto& r : reports) {
    print_report_line(r);
    ok = ok && r.passed;
    arr.push_back(report_to_json(r));
  }
  json summary = {{"in_O_rate", ens.in_O_rate},
                  {"in_Q_rate", ens.in_Q_rate},
                  {"accepted", accepted},
                  {"simulation_seconds", sim_seconds},
                  {"v_mean", ens.v_mean},
                  {"v_var", ens.v_var},
                  {"u_mean", ens.u_mean},
                  {"u_var", ens.u_var},
                  {"s_mean", ens.s_mean},
                  {"s_var", ens.s_var},
                  {"crossing_ratio_mean", ens.crossing_ratio_mean},
                  {"crossing_ratio_stderr", ens.crossing_ratio_stderr}};
  if (!cfg.single_window)
    summary["truncation_rate"] = accepted ? double(truncated) / accepted : 0.0;
  const json report = {
      {"config", config_to_json(cfg)}, {"summary", summary}, {"reports", arr}, {"passed", ok}};
  write_text(dir / "report.json", report.dump(2) + "\n");
  std::ofstream csv(dir / "reports.csv");
  write_reports_csv(csv, reports);
  return ok ? kExitOk : kExitFail;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Vertex-reinforced jump process: exact simulation, densities and "
               "convergence checks",
               "vrjp"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sc, bool need_config) {
    auto* o = sc->add_option("--config", common.config, "JSON run configuration");
    if (need_config) o->required();
    sc->add_option("--seed", common.seed, "Master seed (overrides the config)");
    sc->add_option("--out", common.out, "Output directory (overrides the config)");
    sc->add_option("--threads", common.threads, "Worker threads; affects speed only")
        ->check(CLI::PositiveNumber);
  };
  auto* sim = app.add_subcommand("simulate", "Simulate trajectories, write observables CSV");
  auto* den = app.add_subcommand("density", "Evaluate named densities at given points");
  auto* ver = app.add_subcommand("verify", "Run the oracle suite on built-in fixtures");
  auto* con = app.add_subcommand("converge", "Ensemble run against the limit law, JSON report");
  add_common(sim, true);
  add_common(den, true);
  add_common(ver, false);
  add_common(con, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(common);
    if (den->parsed()) return cmd_density(common);
    if (ver->parsed()) return cmd_verify(common);
    if (con->parsed()) return cmd_converge(common);
  } catch (const ParseError& e) {
    print_error("ParseError", e.what(), {{"line", e.line()}, {"column", e.column()}});
    return kExitUsage;
  } catch (const ValidationError& e) {
    print_error("ValidationError", e.what(), {{"field", e.field()}});
    return kExitUsage;
  } catch (const std::exception& e) {
    print_error("RuntimeError", e.what());
    return kExitFail;
  }
  std::cerr << app.help();
  return kExitUsage;
}

}  // namespace vrjp
