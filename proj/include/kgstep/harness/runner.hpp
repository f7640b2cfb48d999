#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "kgstep/fem.hpp"
#include "kgstep/harness/config.hpp"
#include "kgstep/harness/io.hpp"
#include "kgstep/mesh.hpp"
#include "kgstep/newmark.hpp"
#include "kgstep/observables.hpp"
#include "kgstep/oracles.hpp"
#include "kgstep/trend.hpp"
#include "kgstep/wave_packet.hpp"

namespace kgstep::harness {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Discretization {
  Mesh1D mesh;
  PotentialProfile potential;
  SymTridiagonal mass;
  SymTridiagonal bilinear;
};

inline Discretization discretize(const RunConfig& cfg) {
  cfg.validate();
  Mesh1D mesh(cfg.L, cfg.n_cells);
  auto pot = cfg.potential.build();
  auto g = assemble_mass(mesh);
  auto a = assemble_bilinear(mesh, cfg.c, pot);
  return {std::move(mesh), std::move(pot), std::move(g), std::move(a)};
}

inline LinearSolverKind solver_kind(const RunConfig& cfg) {
  return cfg.solver == "direct" ? LinearSolverKind::direct : LinearSolverKind::cg;
}

/// Nodal coefficients (C0, D0) of the packet and its velocity.
inline std::pair<std::vector<double>, std::vector<double>> initial_data(const RunConfig& cfg, const Mesh1D& mesh) {
  const auto p = cfg.packet_spec();
  auto f = [&](double x) { return eval_f(p, x); };
  auto g = [&](double x) { return eval_g(p, x); };
  if (cfg.initial_data == "l2") return {project_l2(mesh, f), project_l2(mesh, g)};
  return {interpolate(mesh, f), interpolate(mesh, g)};
}

struct Snapshot {
  double t = 0.0;
  std::vector<double> u;
};

struct RunOutput {
  ObservableSeries series;  // every `stride` steps
  std::vector<double> fine_t, fine_mean, fine_sigma;  // every step
  std::vector<double> nodes;
  std::vector<Snapshot> snapshots;
  double max_boundary_fraction = 0.0;
  bool leaked = false;
};

/// One FEM run of the configured problem into out. Throws SolverError on solver
/// failure, leaving the observables recorded so far in out.
inline void run_case(const RunConfig& cfg, RunOutput& out) {
  auto d = discretize(cfg);
  NewmarkIntegrator integ(d.mass, d.bilinear, cfg.newmark_params(), cfg.cg, solver_kind(cfg));
  auto [c0, d0] = initial_data(cfg, d.mesh);
  out = {};
  out.nodes.assign(d.mesh.nodes().begin(), d.mesh.nodes().end());
  out.series.stride = cfg.stride;

  std::map<long, double> snap_steps;
  for (double ts : cfg.snapshot_times) snap_steps[std::lround(ts / cfg.dt)] = ts;

  SeriesRecorder rec(d.mesh, integ, cfg.stride);
  const Mesh1D& mesh = d.mesh;
  const long last = cfg.n_steps();
  const StateObserver observers[] = {{[&](const SolverState& s) {
                                        const auto m = position_moments(mesh, s.C);
                                        out.fine_t.push_back(s.t);
                                        out.fine_mean.push_back(m.mean);
                                        out.fine_sigma.push_back(m.sigma);
                                        if (auto it = snap_steps.find(s.step); it != snap_steps.end())
                                          out.snapshots.push_back({it->second, s.C});
                                        if (s.step % cfg.stride == 0 || s.step == last) {
                                          rec.record(s);
                                          out.series.records.push_back(rec.series().records.back());
                                          out.max_boundary_fraction = rec.max_boundary_fraction();
                                          out.leaked = rec.leaked();
                                        }
                                      },
                                      1}};
  run_simulation(integ, std::move(c0), std::move(d0), observers);
}

inline RunOutput run_case(const RunConfig& cfg) {
  RunOutput out;
  run_case(cfg, out);
  return out;
}

// ---------------------------------------------------------------------------
// Trend report

struct TrendReport {
  ImpactWindow window;
  RegressionResult pre_fit;    // mean over the pre-impact stretch
  RegressionResult mean_fit;   // mean = A t + B over the post-impact window
  RegressionResult sigma_fit;  // sigma = A1 t + B1 over the same window
  std::optional<RegressionResult> sigma_log_fit;
  std::optional<double> t0;  // first upward zero crossing of the mean
  double sigma0 = kNaN;
  double sigma_final = kNaN;
  double sigma_min = kNaN;
  double t_sigma_min = kNaN;
  double mean_peak = kNaN;
  double t_mean_peak = kNaN;
};

struct TrendOptions {
  SmoothingSpec smoothing;
  WindowConfig window;
  bool log_fit = false;
};

/// Fits and diagnostics for one (t, M, sigma) record. The optional fine series
/// (every time step) sharpen t0 and the extrema; the coarse series is used otherwise.
inline TrendReport analyze_trend(std::span<const double> t, std::span<const double> mean,
                                 std::span<const double> sigma, const TrendOptions& opt,
                                 std::span<const double> fine_t = {}, std::span<const double> fine_mean = {},
                                 std::span<const double> fine_sigma = {}) {
  TrendReport r;
  if (opt.window.policy == "fixed") {
    r.window.fit = {opt.window.t_lo, opt.window.t_hi};
    r.window.impact_end = opt.window.t_lo;
    r.window.rule = "fixed";
    r.window.onset = settle_times(t, sigma, opt.smoothing).onset;
  } else {
    r.window = detect_post_impact_window(t, sigma, mean, opt.smoothing);
  }
  r.mean_fit = linear_fit(t, mean, r.window.fit);
  r.sigma_fit = linear_fit(t, sigma, r.window.fit);
  if (opt.log_fit) r.sigma_log_fit = log_linear_fit(t, sigma, r.window.fit);

  // The smoothed onset sees one bandwidth ahead, so the raw series is clean only up to onset - bw.
  const double lead = r.window.onset ? *r.window.onset - resolve_bandwidth(t, opt.smoothing) : kNaN;
  const double min_span = 2.0 * kgstep::detail::mean_spacing(t);
  TimeWindow pre{t.front(), lead - t.front() >= min_span ? lead : t.front() + 0.1 * (t.back() - t.front())};
  if (pre.hi - pre.lo < min_span) pre.hi = pre.lo + min_span;
  r.pre_fit = linear_fit(t, mean, pre);

  const bool fine = !fine_t.empty();
  const auto tt = fine ? fine_t : t;
  const auto mm = fine ? fine_mean : mean;
  const auto ss = fine ? fine_sigma : sigma;
  r.t0 = crossing_time(tt, mm, 0.0);
  r.sigma0 = ss.front();
  r.sigma_final = ss.back();
  const auto smin = std::min_element(ss.begin(), ss.end());
  r.sigma_min = *smin;
  r.t_sigma_min = tt[static_cast<std::size_t>(smin - ss.begin())];
  const auto mmax = std::max_element(mm.begin(), mm.end());
  r.mean_peak = *mmax;
  r.t_mean_peak = tt[static_cast<std::size_t>(mmax - mm.begin())];
  return r;
}

inline TrendOptions trend_options(const RunConfig& cfg, bool log_fit = false) {
  return {cfg.smoothing, cfg.window, log_fit};
}

inline json to_json(const RegressionResult& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"r", f.r},  {"t_lo", f.t_lo},
          {"t_hi", f.t_hi},   {"n_points", f.n_points},   {"degenerate", f.degenerate}};
}

inline json to_json(const TrendReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["window"] = {{"onset", opt(r.window.onset)},
                 {"impact_end", r.window.impact_end},
                 {"t_lo", r.window.fit.lo},
                 {"t_hi", r.window.fit.hi},
                 {"rule", r.window.rule}};
  j["pre_mean_fit"] = to_json(r.pre_fit);
  j["mean_fit"] = to_json(r.mean_fit);
  j["sigma_fit"] = to_json(r.sigma_fit);
  if (r.sigma_log_fit) j["sigma_log_fit"] = to_json(*r.sigma_log_fit);
  j["t0"] = opt(r.t0);
  j["sigma0"] = r.sigma0;
  j["sigma_final"] = r.sigma_final;
  j["sigma_min"] = r.sigma_min;
  j["t_sigma_min"] = r.t_sigma_min;
  j["mean_peak"] = r.mean_peak;
  j["t_mean_peak"] = r.t_mean_peak;
  return j;
}

// ---------------------------------------------------------------------------
// simulate

/// Largest |E - E0| / E0 over a series.
inline double max_energy_drift(const ObservableSeries& s) {
  if (s.records.empty()) return 0.0;
  const double e0 = s.records.front().energy;
  double worst = 0.0;
  for (const auto& r : s.records) worst = std::max(worst, std::abs(r.energy - e0) / std::abs(e0));
  return worst;
}


struct SimulateResult {
  RunOutput output;
  TrendReport trend;
  bool ok = false;
  std::string error;
  std::vector<std::string> warnings;
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Runs cfg and writes observables.csv, snapshot files and manifest.json into dir.
/// Solver failures are reported in the result (and the manifest), not thrown.
inline SimulateResult simulate_to_dir(const RunConfig& cfg, const fs::path& dir, const std::string& command = "simulate") {
  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(dir);
  SimulateResult res;
  RunManifest man;
  man.command = command;
  man.config = to_json(cfg);
  man.config["output_dir"] = dir.string();

  try {
    run_case(cfg, res.output);
    res.ok = true;
  } catch (const SolverError& e) {
    res.error = e.what();
  }

  std::vector<std::string> files;
  write_observables_csv(dir / "observables.csv", res.output.series);
  files.push_back("observables.csv");
  for (const auto& s : res.output.snapshots) {
    const std::string name = "snapshot_t" + fmt_short(s.t) + ".csv";
    write_snapshot_csv(dir / name, res.output.nodes, s.u);
    files.push_back(name);
  }
  if (cfg.plot_script) {
    write_plot_script(dir);
    files.push_back("plot_observables.py");
  }
  if (res.output.leaked)
    res.warnings.push_back("wave reached the boundary band (max mass fraction " +
                           fmt_double(res.output.max_boundary_fraction) + "); natural boundary reflections may contaminate results");

  json results;
  results["max_boundary_fraction"] = res.output.max_boundary_fraction;
  if (res.ok && res.output.series.records.size() >= 16) {
    try {
      const auto& s = res.output.series;
      res.trend = analyze_trend(s.times(), s.means(), s.sigmas(), trend_options(cfg), res.output.fine_t,
                                res.output.fine_mean, res.output.fine_sigma);
      results["trend"] = to_json(res.trend);
    } catch (const Error& e) {
      res.warnings.push_back(std::string("trend analysis skipped: ") + e.what());
    }
    const auto e = max_energy_drift(res.output.series);
    results["max_relative_energy_drift"] = e;
  }

  man.status = res.ok ? "ok" : "failed";
  man.partial = !res.ok;
  man.error = res.error;
  man.warnings = res.warnings;
  man.files = files;
  man.extra = results;
  man.duration_seconds = seconds_since(start);
  write_manifest(dir, man);
  return res;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepRow {
  double a2 = 0.0;
  bool ok = false;
  std::string error;
  TrendReport trend;
};

/// Runs base with potential a2 replaced by each value, in parallel, each in its own
/// subdirectory of dir. Rows come back in input order whatever the thread count.
inline std::vector<SweepRow> run_sweep(const RunConfig& base, const std::vector<double>& a2_list, const fs::path& dir,
                                       unsigned jobs = 0) {
  if (a2_list.empty()) throw ConfigError("sweep needs at least one a2 value");
  if (base.potential.kind != "step") throw ConfigError("sweep varies a2 of a step potential; potential.kind must be 'step'");
  base.validate();
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(a2_list.size()));

  std::vector<SweepRow> rows(a2_list.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < a2_list.size();) {
      SweepRow& row = rows[i];
      row.a2 = a2_list[i];
      try {
        RunConfig cfg = base;
        cfg.potential.a2 = a2_list[i];
        const auto sub = dir / ("a2_" + fmt_short(a2_list[i]));
        auto res = simulate_to_dir(cfg, sub, "sweep");
        row.ok = res.ok && res.trend.mean_fit.n_points >= 2;
        row.error = res.ok ? (row.ok ? "" : "trend analysis failed") : res.error;
        row.trend = res.trend;
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < jobs; ++k) pool.emplace_back(worker);
  }
  return rows;
}

inline void write_sweep_table(const fs::path& path, const std::vector<SweepRow>& rows, double threshold) {
  CsvWriter w(path);
  w.header({"a2", "regime", "A", "B", "r", "A1", "B1", "r1", "t0", "sigma_min", "t_sigma_min", "sigma_final",
            "mean_peak", "t_mean_peak", "impact_onset", "window_lo", "window_hi", "status"});
  for (const auto& row : rows) {
    const auto& t = row.trend;
    auto& o = w.stream();
    o << fmt_double(row.a2) << ',' << (row.a2 > threshold ? "above_threshold" : "below_threshold");
    if (!row.ok) {
      for (int k = 0; k < 15; ++k) o << ",nan";
      std::string msg = row.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      o << ",failed: " << msg << '\n';
      continue;
    }
    for (double v : {t.mean_fit.slope, t.mean_fit.intercept, t.mean_fit.r, t.sigma_fit.slope, t.sigma_fit.intercept,
                     t.sigma_fit.r, t.t0.value_or(kNaN), t.sigma_min, t.t_sigma_min, t.sigma_final, t.mean_peak,
                     t.t_mean_peak, t.window.onset.value_or(kNaN), t.window.fit.lo, t.window.fit.hi})
      o << ',' << fmt_double(v);
    o << ",ok\n";
  }
  w.close();
}

// ---------------------------------------------------------------------------
// oracles bound to the FEM pipeline

/// Constant value of the configured potential, or ConfigError when it varies.
inline double require_constant_potential(const RunConfig& cfg) {
  const auto pot = cfg.potential.build();
  const auto v = pot.constant_value();
  if (!v) throw ConfigError("no oracle for step potential: reference solutions need a constant potential");
  return *v;
}

/// Reference field at time t on the mesh nodes for the configured packet.
class ReferenceSolution {
 public:
  ReferenceSolution(const RunConfig& cfg, const Mesh1D& mesh)
      : mesh_(mesh), packet_(cfg.packet_spec()), c_(cfg.c), m_sq_(require_constant_potential(cfg)) {
    if (m_sq_ > 0.0) {
      const auto grid = make_fourier_grid(mesh);
      std::vector<double> f(grid.n_points), g(grid.n_points);
      for (std::size_t k = 0; k < grid.n_points; ++k) {
        f[k] = eval_f(packet_, grid.x(k));
        g[k] = eval_g(packet_, grid.x(k));
      }
      prop_.emplace(grid, f, g, m_sq_, c_);
    }
  }

  std::string name() const { return m_sq_ > 0.0 ? "fourier" : "dalembert"; }

  std::vector<double> at(double t) {
    if (prop_) return restrict_to_mesh(prop_->grid(), prop_->field(t), mesh_);
    std::vector<double> u(mesh_.n_nodes());
    const auto f = [this](double x) { return eval_f(packet_, x); };
    const auto g = [this](double x) { return eval_g(packet_, x); };
    for (std::size_t j = 0; j < u.size(); ++j) u[j] = dalembert_solution(f, g, c_, t, mesh_.node(j));
    return u;
  }

 private:
  const Mesh1D& mesh_;
  WavePacketSpec packet_;
  double c_;
  double m_sq_;
  std::optional<ConstantPotentialPropagator> prop_;
};

struct OracleRecord {
  double t = 0.0;
  double error = 0.0;
};

struct OracleCheckResult {
  std::string oracle;
  std::vector<OracleRecord> records;
  double max_error = 0.0;
  double threshold = 1e-2;
  bool pass = false;
};

/// Relative L2 difference between the FEM field and the reference at every recorded step.
inline OracleCheckResult run_oracle_check(const RunConfig& cfg, double threshold = 1e-2) {
  require_constant_potential(cfg);
  auto d = discretize(cfg);
  ReferenceSolution ref(cfg, d.mesh);
  NewmarkIntegrator integ(d.mass, d.bilinear, cfg.newmark_params(), cfg.cg, solver_kind(cfg));
  auto [c0, d0] = initial_data(cfg, d.mesh);
  OracleCheckResult out;
  out.oracle = ref.name();
  out.threshold = threshold;
  const StateObserver obs[] = {{[&](const SolverState& s) {
                                  const auto u = ref.at(s.t);
                                  out.records.push_back({s.t, relative_l2_difference(d.mesh, s.C, u)});
                                },
                                cfg.stride}};
  run_simulation(integ, std::move(c0), std::move(d0), obs);
  for (const auto& r : out.records) out.max_error = std::max(out.max_error, r.error);
  out.pass = out.max_error <= threshold;
  return out;
}

// ---------------------------------------------------------------------------
// convergence

struct ConvergenceLevel {
  double step = 0.0;  // dt or h
  double error = 0.0;
  double order = kNaN;  // against the previous level
};

struct ConvergenceResult {
  std::string vary;  // "dt" or "h"
  std::string oracle;
  std::vector<ConvergenceLevel> levels;
  double fitted_order = kNaN;  // least-squares slope of log error against log step
};

/// Final-time relative L2 error against the reference for each dt (or h) level.
inline ConvergenceResult run_convergence(const RunConfig& base, const std::string& vary, std::vector<double> steps) {
  if (vary != "dt" && vary != "h") throw ConfigError("convergence varies 'dt' or 'h'");
  if (steps.size() < 3) throw ConfigError("convergence needs at least 3 refinement levels");
  require_constant_potential(base);
  std::sort(steps.begin(), steps.end(), std::greater<>());
  if (std::adjacent_find(steps.begin(), steps.end()) != steps.end())
    throw ConfigError("convergence levels must be distinct");

  ConvergenceResult res;
  res.vary = vary;
  std::optional<Mesh1D> ref_mesh;
  std::optional<ReferenceSolution> ref;
  std::vector<double> ref_field;
  for (double step : steps) {
    RunConfig cfg = base;
    if (vary == "dt") {
      cfg.dt = step;
    } else {
      const double cells = 2.0 * cfg.L / step;
      cfg.n_cells = static_cast<int>(std::lround(cells));
      if (std::abs(cells - cfg.n_cells) > 1e-6 * cells)
        throw ConfigError("h = " + fmt_short(step) + " does not divide 2L");
    }
    cfg.validate();
    auto d = discretize(cfg);
    if (vary == "h" || !ref) {
      ref_mesh.emplace(d.mesh);
      ref.reset();
      ref.emplace(cfg, *ref_mesh);
      ref_field = ref->at(cfg.T);
      res.oracle = ref->name();
    }
    NewmarkIntegrator integ(d.mass, d.bilinear, cfg.newmark_params(), cfg.cg, solver_kind(cfg));
    auto [c0, d0] = initial_data(cfg, d.mesh);
    const auto fin = run_simulation(integ, std::move(c0), std::move(d0));
    ConvergenceLevel lvl{step, relative_l2_difference(d.mesh, fin.C, ref_field)};
    if (!res.levels.empty()) {
      const auto& prev = res.levels.back();
      lvl.order = std::log(prev.error / lvl.error) / std::log(prev.step / lvl.step);
    }
    res.levels.push_back(lvl);
  }
  std::vector<double> ls, le;
  for (const auto& l : res.levels) {
    ls.push_back(std::log(l.step));
    le.push_back(std::log(l.error));
  }
  // linear_fit wants increasing abscissae; log steps are decreasing here.
  std::reverse(ls.begin(), ls.end());
  std::reverse(le.begin(), le.end());
  res.fitted_order = linear_fit(ls, le).slope;
  return res;
}

inline void write_convergence_csv(const fs::path& path, const ConvergenceResult& r) {
  CsvWriter w(path);
  w.header({r.vary, "error", "order"});
  for (const auto& l : r.levels) w.row({l.step, l.error, l.order});
  w.close();
}

inline void write_oracle_csv(const fs::path& path, const OracleCheckResult& r) {
  CsvWriter w(path);
  w.header({"t", "relative_l2_error"});
  for (const auto& rec : r.records) w.row({rec.t, rec.error});
  w.close();
}

}  // namespace kgstep::harness
