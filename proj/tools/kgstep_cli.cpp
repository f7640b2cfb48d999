// kgstep: command-line front end for Klein-Gordon step-potential runs.

#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kgstep/harness/config.hpp"
#include "kgstep/harness/io.hpp"
#include "kgstep/harness/runner.hpp"

namespace {

using namespace kgstep;
using namespace kgstep::harness;

enum Exit : int { kOk = 0, kFailure = 1, kConfig = 2, kSolver = 3, kAcceptance = 4 };

using Override = std::function<void(RunConfig&)>;

/// Flags that mirror RunConfig fields. Each flag given on the command line
/// queues an override applied after the --config file is loaded.
struct ConfigFlags {
  std::string config_path;
  std::vector<Override> overrides;

  template <class T>
  void bind(CLI::App* app, const std::string& name, const std::string& help, std::function<void(RunConfig&, T)> set) {
    app->add_option_function<T>(name, [this, set](const T& v) { overrides.push_back([set, v](RunConfig& c) { set(c, v); }); },
                                help);
  }

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config (a manifest.json is accepted too)");
    bind<double>(app, "--c", "wave speed", [](RunConfig& c, double v) { c.c = v; });
    bind<std::string>(app, "--potential", "step | barrier | constant | piecewise",
                      [](RunConfig& c, std::string v) { c.potential.kind = v; });
    bind<double>(app, "--a1", "potential left of the step (or the constant value)",
                 [](RunConfig& c, double v) { c.potential.a1 = v; });
    bind<double>(app, "--a2", "potential right of the step", [](RunConfig& c, double v) { c.potential.a2 = v; });
    bind<double>(app, "--height", "barrier height", [](RunConfig& c, double v) { c.potential.height = v; });
    bind<double>(app, "--x-start", "barrier start", [](RunConfig& c, double v) { c.potential.x_start = v; });
    bind<double>(app, "--x-end", "barrier end", [](RunConfig& c, double v) { c.potential.x_end = v; });
    bind<double>(app, "--L", "half length of the domain", [](RunConfig& c, double v) { c.L = v; });
    bind<int>(app, "--n-cells", "number of mesh cells (even)", [](RunConfig& c, int v) { c.n_cells = v; });
    bind<double>(app, "--spacing", "mesh spacing h (sets n-cells = 2L/h)", [](RunConfig& c, double v) {
      const double cells = 2.0 * c.L / v;
      c.n_cells = static_cast<int>(std::lround(cells));
      if (std::abs(cells - c.n_cells) > 1e-6 * cells) throw ConfigError("--spacing does not divide 2L");
    });
    bind<double>(app, "--dt", "time step", [](RunConfig& c, double v) { c.dt = v; });
    bind<double>(app, "--T", "final time", [](RunConfig& c, double v) { c.T = v; });
    bind<double>(app, "--beta", "Newmark beta", [](RunConfig& c, double v) { c.beta = v; });
    bind<double>(app, "--gamma", "Newmark gamma", [](RunConfig& c, double v) { c.gamma = v; });
    bind<std::string>(app, "--solver", "cg | direct", [](RunConfig& c, std::string v) { c.solver = v; });
    bind<double>(app, "--cg-tol", "CG relative residual tolerance",
                 [](RunConfig& c, double v) { c.cg.rel_tolerance = v; });
    bind<int>(app, "--cg-max-iter", "CG iteration cap (0: 10 n)", [](RunConfig& c, int v) { c.cg.max_iterations = v; });
    bind<bool>(app, "--jacobi", "Jacobi-preconditioned CG", [](RunConfig& c, bool v) { c.cg.jacobi = v; });
    bind<std::string>(app, "--initial-data", "interpolation | l2",
                      [](RunConfig& c, std::string v) { c.initial_data = v; });
    bind<double>(app, "--packet-center", "packet centre", [](RunConfig& c, double v) { c.packet.center = v; });
    bind<long>(app, "--stride", "record observables every N steps", [](RunConfig& c, long v) { c.stride = v; });
    bind<std::vector<double>>(app, "--snapshot", "times at which u(t, x) is written",
                              [](RunConfig& c, std::vector<double> v) { c.snapshot_times = v; });
    bind<std::string>(app, "--kernel", "epanechnikov | gaussian | moving_average", [](RunConfig& c, std::string v) {
      try {
        c.smoothing.kernel = kernel_from_string(v);
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
    });
    bind<double>(app, "--bandwidth", "smoothing bandwidth in time units (0: 20 samples)",
                 [](RunConfig& c, double v) { c.smoothing.bandwidth = v; });
    bind<std::vector<double>>(app, "--window", "fixed regression window LO HI", [](RunConfig& c, std::vector<double> v) {
      if (v.size() != 2) throw ConfigError("--window takes two values");
      c.window = {"fixed", v[0], v[1]};
    });
    bind<std::string>(app, "--out", "output directory", [](RunConfig& c, std::string v) { c.output_dir = v; });
    bind<std::string>(app, "--seed-label", "free-form run label", [](RunConfig& c, std::string v) { c.seed_label = v; });
    bind<bool>(app, "--plot-script", "also write plot_observables.py", [](RunConfig& c, bool v) { c.plot_script = v; });
  }

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    for (const auto& o : overrides) o(cfg);
    cfg.validate();
    return cfg;
  }
};

void print_trend(const TrendReport& t) {
  std::printf("window [%.4f, %.4f] (%s)\n", t.window.fit.lo, t.window.fit.hi, t.window.rule.c_str());
  std::printf("mean  = %.6g t + %.6g   r = %.6f\n", t.mean_fit.slope, t.mean_fit.intercept, t.mean_fit.r);
  std::printf("sigma = %.6g t + %.6g   r = %.6f%s\n", t.sigma_fit.slope, t.sigma_fit.intercept, t.sigma_fit.r,
              t.sigma_fit.degenerate ? " (constant)" : "");
  if (t.sigma_log_fit)
    std::printf("log sigma = %.6g t + %.6g   r = %.6f\n", t.sigma_log_fit->slope, t.sigma_log_fit->intercept,
                t.sigma_log_fit->r);
  if (t.t0) std::printf("t0 = %.6f\n", *t.t0);
  std::printf("sigma(0) = %.6f  sigma(end) = %.6f  min sigma = %.6f at t = %.4f\n", t.sigma0, t.sigma_final,
              t.sigma_min, t.t_sigma_min);
}

int cmd_simulate(const ConfigFlags& flags) {
  const auto cfg = flags.resolve();
  const auto res = simulate_to_dir(cfg, cfg.output_dir);
  for (const auto& w : res.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  if (!res.ok) {
    std::fprintf(stderr, "solver failure: %s\n", res.error.c_str());
    return kSolver;
  }
  std::printf("wrote %zu records to %s\n", res.output.series.records.size(), cfg.output_dir.c_str());
  if (res.trend.mean_fit.n_points >= 2) print_trend(res.trend);
  return kOk;
}

int cmd_sweep(const ConfigFlags& flags, const std::vector<double>& a2s, unsigned jobs) {
  const auto cfg = flags.resolve();
  const auto start = std::chrono::steady_clock::now();
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  const auto rows = run_sweep(cfg, a2s, dir, jobs);
  const double threshold = classical_threshold(cfg.packet_spec());
  write_sweep_table(dir / "table.csv", rows, threshold);

  RunManifest man;
  man.command = "sweep";
  man.config = to_json(cfg);
  man.extra["a2"] = a2s;
  man.files = {"table.csv"};
  bool all_ok = true;
  for (const auto& r : rows) {
    if (!r.ok) {
      all_ok = false;
      man.warnings.push_back("a2 = " + fmt_short(r.a2) + " failed: " + r.error);
    }
    const std::string sub = "a2_" + fmt_short(r.a2);
    for (const char* f : {"observables.csv", "manifest.json"}) man.files.push_back(sub + "/" + f);
  }
  man.status = all_ok ? "ok" : "failed";
  man.partial = !all_ok;
  man.duration_seconds = seconds_since(start);
  write_manifest(dir, man);

  std::printf("%8s %10s %10s %10s %10s %10s %10s %10s\n", "a2", "A", "B", "r", "A1", "B1", "r1", "t0");
  for (const auto& r : rows) {
    if (!r.ok) {
      std::printf("%8g failed: %s\n", r.a2, r.error.c_str());
      continue;
    }
    const auto& t = r.trend;
    std::printf("%8g %10.5f %10.5f %10.6f %10.5f %10.5f %10.6f %10.5f\n", r.a2, t.mean_fit.slope,
                t.mean_fit.intercept, t.mean_fit.r, t.sigma_fit.slope, t.sigma_fit.intercept, t.sigma_fit.r,
                t.t0.value_or(kNaN));
  }
  return all_ok ? kOk : kSolver;
}

int cmd_convergence(const ConfigFlags& flags, const std::string& vary, const std::vector<double>& levels) {
  const auto cfg = flags.resolve();
  const auto start = std::chrono::steady_clock::now();
  const auto res = run_convergence(cfg, vary, levels);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  write_convergence_csv(dir / "convergence.csv", res);
  RunManifest man;
  man.command = "convergence";
  man.config = to_json(cfg);
  man.extra = {{"vary", vary}, {"oracle", res.oracle}, {"least_squares_order", res.fitted_order}};
  man.files = {"convergence.csv"};
  man.duration_seconds = seconds_since(start);
  write_manifest(dir, man);

  std::printf("%12s %14s %8s   (oracle: %s)\n", vary.c_str(), "error", "order", res.oracle.c_str());
  for (const auto& l : res.levels) std::printf("%12g %14.6e %8.4f\n", l.step, l.error, l.order);
  std::printf("least-squares order: %.4f\n", res.fitted_order);
  return kOk;
}

int cmd_oracle_check(const ConfigFlags& flags, double threshold) {
  const auto cfg = flags.resolve();
  const auto start = std::chrono::steady_clock::now();
  const auto res = run_oracle_check(cfg, threshold);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  write_oracle_csv(dir / "oracle_check.csv", res);
  RunManifest man;
  man.command = "oracle-check";
  man.config = to_json(cfg);
  man.extra = {{"oracle", res.oracle}, {"max_error", res.max_error}, {"threshold", threshold}, {"pass", res.pass}};
  man.files = {"oracle_check.csv"};
  man.duration_seconds = seconds_since(start);
  write_manifest(dir, man);
  std::printf("%s oracle: max relative L2 error %.3e (threshold %.1e) %s\n", res.oracle.c_str(), res.max_error,
              threshold, res.pass ? "PASS" : "FAIL");
  return res.pass ? kOk : kAcceptance;
}

int cmd_trend(const ConfigFlags& flags, const std::string& input, bool log_fit) {
  const auto cfg = flags.resolve();
  const auto table = read_csv(input);
  const auto& t = table.column("t");
  const auto& m = table.column("mean");
  const auto& s = table.column("sigma");
  const auto rep = analyze_trend(t, m, s, trend_options(cfg, log_fit));
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  const auto ms = kernel_smooth(t, m, cfg.smoothing);
  const auto ss = kernel_smooth(t, s, cfg.smoothing);
  CsvWriter w(dir / "trend.csv");
  w.header({"t", "mean", "sigma", "mean_smooth", "sigma_smooth"});
  for (std::size_t i = 0; i < t.size(); ++i) w.row({t[i], m[i], s[i], ms[i], ss[i]});
  w.close();
  RunManifest man;
  man.command = "trend";
  man.config = to_json(cfg);
  man.extra = to_json(rep);
  man.extra["input"] = input;
  man.files = {"trend.csv"};
  write_manifest(dir, man);
  print_trend(rep);
  return kOk;
}

int cmd_verify(const std::string& path) {
  const auto chk = verify_manifest(path);
  for (const auto& p : chk.problems) std::printf("%s\n", p.c_str());
  std::printf("%d files checked: %s\n", chk.n_files, chk.ok ? "OK" : "MISMATCH");
  return chk.ok ? kOk : kAcceptance;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Klein-Gordon wave packet on a potential step: P1 finite elements with Newmark time stepping"};
  app.require_subcommand(1);

  ConfigFlags sim_flags, sweep_flags, conv_flags, oracle_flags, trend_flags;
  auto* sim = app.add_subcommand("simulate", "single run: observables.csv, snapshots, manifest.json");
  sim_flags.attach(sim);

  auto* sweep = app.add_subcommand("sweep", "one run per a2 value plus table.csv");
  sweep_flags.attach(sweep);
  std::vector<double> a2s = {2, 6, 9, 15, 150};
  unsigned jobs = 0;
  sweep->add_option("--a2-list", a2s, "barrier heights")->expected(1, -1);
  sweep->add_option("--jobs", jobs, "parallel runs (0: hardware threads)");

  auto* conv = app.add_subcommand("convergence", "error against a reference solution under refinement");
  conv_flags.attach(conv);
  std::string vary = "dt";
  std::vector<double> levels;
  conv->add_option("--vary", vary, "dt | h")->check(CLI::IsMember({"dt", "h"}));
  conv->add_option("--levels", levels, "step sizes, at least three")->required()->expected(3, -1);

  auto* oracle = app.add_subcommand("oracle-check", "FEM against d'Alembert (m^2 = 0) or Fourier (m^2 > 0)");
  oracle_flags.attach(oracle);
  double threshold = 1e-2;
  oracle->add_option("--threshold", threshold, "largest acceptable relative L2 error");

  auto* trend = app.add_subcommand("trend", "re-analyse an existing observables.csv");
  trend_flags.attach(trend);
  std::string input;
  bool log_fit = false;
  trend->add_option("--input", input, "observables.csv to analyse")->required();
  trend->add_flag("--log-fit", log_fit, "also fit log(sigma) against t");

  auto* verify = app.add_subcommand("verify-manifest", "recompute the checksums listed in a manifest");
  std::string manifest;
  verify->add_option("manifest", manifest, "path to manifest.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*sim) return cmd_simulate(sim_flags);
    if (*sweep) return cmd_sweep(sweep_flags, a2s, jobs);
    if (*conv) return cmd_convergence(conv_flags, vary, levels);
    if (*oracle) return cmd_oracle_check(oracle_flags, threshold);
    if (*trend) return cmd_trend(trend_flags, input, log_fit);
    if (*verify) return cmd_verify(manifest);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return kConfig;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kSolver;
  } catch (const OracleError& e) {
    std::fprintf(stderr, "oracle error: %s\n", e.what());
    return kFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kOk;
}
