// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "kgstep/fem.hpp"
#include "kgstep/harness/runner.hpp"
#include "kgstep/linear_solver.hpp"
#include "kgstep/observables.hpp"
#include "kgstep/oracles.hpp"
#include "kgstep/trend.hpp"

using namespace kgstep;
using namespace kgstep::harness;

namespace {

int g_failed = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail, double seconds) {
  std::printf("[%s] %2d %-28s %s (%.1fs)\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++g_failed;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

using Clock = std::chrono::steady_clock;

struct Timer {
  Clock::time_point t0 = Clock::now();
  double seconds() const { return std::chrono::duration<double>(Clock::now() - t0).count(); }
};

struct PaperRun {
  RunOutput out;
  TrendReport trend;
};

/// Default paper configuration (h = 0.05, dt = 0.01, T = 15, stride 10) with the given a2.
const PaperRun& paper_run(double a2) {
  static std::map<double, PaperRun> cache;
  if (auto it = cache.find(a2); it != cache.end()) return it->second;
  RunConfig cfg;
  cfg.potential.a2 = a2;
  PaperRun r;
  r.out = run_case(cfg);
  const auto& s = r.out.series;
  r.trend = analyze_trend(s.times(), s.means(), s.sigmas(), trend_options(cfg), r.out.fine_t, r.out.fine_mean,
                          r.out.fine_sigma);
  return cache.emplace(a2, std::move(r)).first->second;
}

double max_energy_drift_of(const ObservableSeries& s) { return max_energy_drift(s); }

RunConfig constant_config(double m_sq) {
  RunConfig c;
  c.potential.kind = "constant";
  c.potential.a1 = m_sq;
  return c;
}

void criterion_1() {
  Timer tm;
  RunConfig c = constant_config(9.0);
  c.n_cells = 9600;  // h = 0.0125
  c.T = 5.0;
  const auto r = run_convergence(c, "dt", {0.04, 0.02, 0.01});
  const bool pass = r.fitted_order >= 1.8 && r.fitted_order <= 2.2;
  report(1, "temporal order 2", pass,
         fmt("errors %.3e %.3e %.3e, orders %.3f %.3f, fitted %.3f in [1.8, 2.2]", r.levels[0].error,
             r.levels[1].error, r.levels[2].error, r.levels[1].order, r.levels[2].order, r.fitted_order),
         tm.seconds());
}

void criterion_2() {
  Timer tm;
  RunConfig c;  // paper step, a2 = 150, h = 0.05
  c.dt = 10.0 * c.h();
  c.T = 1000 * c.dt;
  auto d = discretize(c);
  NewmarkIntegrator integ(d.mass, d.bilinear, c.newmark_params(), c.cg, solver_kind(c));
  auto [c0, d0] = initial_data(c, d.mesh);
  const double n0 = norm2(c0);
  const double e0 = integ.energy({0, c0, d0, 0.0});
  double max_ratio = 0.0, drift = 0.0;
  const StateObserver obs[] = {{[&](const SolverState& s) {
                                  max_ratio = std::max(max_ratio, norm2(s.C) / n0);
                                  drift = std::max(drift, std::abs(integ.energy(s) - e0) / e0);
                                },
                                1}};
  run_simulation(integ, c0, d0, obs);
  const bool pass = max_ratio <= 10.0 && drift <= 1e-6;
  report(2, "unconditional stability", pass,
         fmt("dt = 10h = %.2f, 1000 steps: max |C|/|C0| = %.3f (<= 10), energy drift %.2e (<= 1e-6)", c.dt,
             max_ratio, drift),
         tm.seconds());
}

void criterion_3() {
  Timer tm;
  const auto& r = paper_run(150.0);
  const double drift = max_energy_drift_of(r.out.series);
  report(3, "energy conservation", drift <= 1e-8,
         fmt("a2 = 150, %zu records, max |E-E0|/E0 = %.2e (<= 1e-8)", r.out.series.records.size(), drift),
         tm.seconds());
}

void criterion_4() {
  Timer tm;
  const auto& r = paper_run(150.0);
  const auto t = r.out.series.times();
  const auto m = r.out.series.means();
  const auto s = r.out.series.sigmas();
  const auto fit = linear_fit(t, m, {0.0, 1.0});
  double dev = 0.0;
  for (std::size_t i = 0; i < t.size() && t[i] <= 1.0 + 1e-12; ++i) dev = std::max(dev, std::abs(s[i] - s[0]) / s[0]);
  const bool pass = std::abs(fit.slope - 1.0) <= 0.02 && fit.r >= 0.9999 && dev <= 0.02;
  report(4, "pre-impact transport", pass,
         fmt("t in [0,1]: slope %.5f (1 +- 0.02), r %.6f (>= 0.9999), max sigma deviation %.2e (<= 0.02)", fit.slope,
             fit.r, dev),
         tm.seconds());
}

void criterion_5() {
  Timer tm;
  using boost::math::quadrature::gauss_kronrod;
  const WavePacketSpec p;
  auto f2 = [&](double x) { return eval_f(p, x) * eval_f(p, x); };
  const double l2 = gauss_kronrod<double, 61>::integrate(f2, -60.0, 60.0, 20, 1e-14);
  const double mean = gauss_kronrod<double, 61>::integrate([&](double x) { return x * f2(x); }, -60.0, 60.0, 20, 1e-14) / l2;
  const double var =
      gauss_kronrod<double, 61>::integrate([&](double x) { return (x - mean) * (x - mean) * f2(x); }, -60.0, 60.0, 20,
                                           1e-14) / l2;
  const double sigma = std::sqrt(var);
  const RunConfig c;
  const Mesh1D mesh(c.L, c.n_cells);
  const auto [c0, d0] = initial_data(c, mesh);
  const double fem = position_moments(mesh, c0).sigma;
  const bool pass = sigma >= 0.63 && sigma <= 0.67 && std::abs(fem - sigma) <= 1e-3;
  report(5, "sigma(0) consistency", pass,
         fmt("continuous %.6f in [0.63, 0.67], FEM %.6f, difference %.1e (<= 1e-3)", sigma, fem, std::abs(fem - sigma)),
         tm.seconds());
}

void criterion_6() {
  Timer tm;
  const auto& r = paper_run(150.0);
  const auto& t = r.trend;
  const double final_dev = std::abs(t.sigma_final - t.sigma0) / t.sigma0;
  const double slope_dev = std::abs(t.mean_fit.slope + t.pre_fit.slope) / std::abs(t.pre_fit.slope);
  const bool pass = t.mean_fit.slope >= -1.03 && t.mean_fit.slope <= -0.97 && t.mean_fit.r <= -0.999 &&
                    final_dev <= 0.02 && slope_dev <= 0.03;
  report(6, "total reflection a2=150", pass,
         fmt("window [%.2f, %.2f]: A %.5f in [-1.03, -0.97], r %.6f (<= -0.999), final sigma dev %.2e (<= 0.02), "
             "slope vs -pre %.2e (<= 0.03)",
             t.window.fit.lo, t.window.fit.hi, t.mean_fit.slope, t.mean_fit.r, final_dev, slope_dev),
         tm.seconds());
}

void criterion_7() {
  Timer tm;
  const auto& t = paper_run(15.0).trend;
  const bool pass = t.mean_fit.slope >= -1.03 && t.mean_fit.slope <= -0.96 && t.mean_fit.r <= -0.999 &&
                    std::abs(t.sigma_fit.slope) <= 0.005 && t.sigma_fit.intercept >= 0.63 &&
                    t.sigma_fit.intercept <= 0.68;
  report(7, "large barrier a2=15", pass,
         fmt("window [%.2f, %.2f]: A %.5f in [-1.03, -0.96], r %.6f, |A1| %.2e (<= 0.005), B1 %.4f in [0.63, 0.68]",
             t.window.fit.lo, t.window.fit.hi, t.mean_fit.slope, t.mean_fit.r, std::abs(t.sigma_fit.slope),
             t.sigma_fit.intercept),
         tm.seconds());
}

void criterion_8() {
  Timer tm;
  const std::vector<std::pair<double, double>> quoted{{2.0, 6.2}, {2.5, 2.75}, {4.0, 1.56}, {5.0, 1.05}, {6.0, 0.71}};
  bool pass = true;
  std::string detail;
  double prev = INFINITY;
  for (const auto& [a2, want] : quoted) {
    const double got = paper_run(a2).trend.sigma_final;
    const double rel = std::abs(got - want) / want;
    const bool ok = rel <= 0.15;
    pass = pass && ok && got < prev;
    prev = got;
    detail += fmt("a2=%g: %.3f vs %.2f (%+.1f%%%s) ", a2, got, want, 100.0 * (got - want) / want, ok ? "" : " OUT");
  }
  report(8, "small-barrier sigma(15)", pass, detail + "[15% band, monotone]", tm.seconds());
}

void criterion_9() {
  Timer tm;
  std::string detail;
  bool pass = true;
  double prev = -INFINITY;
  for (double a2 : {1.0, 2.0, 4.0, 6.0}) {
    const auto t0 = paper_run(a2).trend.t0;
    if (!t0) {
      pass = false;
      detail += fmt("a2=%g: none ", a2);
      continue;
    }
    pass = pass && *t0 > prev;
    prev = *t0;
    detail += fmt("a2=%g: %.4f ", a2, *t0);
  }
  report(9, "t0 increasing in a2", pass, detail + "(mean crossing zero, every step)", tm.seconds());
}

void criterion_10() {
  Timer tm;
  const auto& a = paper_run(15.0).trend;
  const auto& b = paper_run(150.0).trend;
  const double dip15 = a.sigma0 - a.sigma_min, dip150 = b.sigma0 - b.sigma_min;
  const bool pass = dip15 > 0.0 && dip150 > 0.0 && dip150 > dip15;
  report(10, "sigma dip at impact", pass,
         fmt("a2=15: min %.4f at t=%.2f (dip %.4f); a2=150: min %.4f at t=%.2f (dip %.4f)", a.sigma_min,
             a.t_sigma_min, dip15, b.sigma_min, b.t_sigma_min, dip150),
         tm.seconds());
}

void criterion_11() {
  Timer tm;
  const double m_sq = 9.0;
  RunConfig c = constant_config(m_sq);
  c.T = 6.0;
  auto d = discretize(c);
  const auto grid = make_fourier_grid(d.mesh);
  const RightMovingPacket rp;
  const auto data = sample_right_moving_packet(grid, rp, c.c, m_sq);
  const double xi_peak = spectral_peak(grid, data.displacement);
  const double vg = group_velocity(xi_peak, c.c, m_sq);
  NewmarkIntegrator integ(d.mass, d.bilinear, c.newmark_params(), c.cg, solver_kind(c));
  SeriesRecorder rec(d.mesh, integ, c.stride);
  const StateObserver obs[] = {rec.observer()};
  run_simulation(integ, restrict_to_mesh(grid, data.displacement, d.mesh),
                 restrict_to_mesh(grid, data.velocity, d.mesh), obs);
  const auto& s = rec.series();
  const auto t = s.times();
  const auto mf = linear_fit(t, s.means(), {2.0, 6.0});
  const auto sf = linear_fit(t, s.sigmas(), {2.0, 6.0});
  const double rel = std::abs(mf.slope - vg) / vg;
  const bool pass = rel <= 0.05 && std::abs(mf.r) >= 0.999 && std::abs(sf.r) >= 0.999;
  report(11, "group velocity law", pass,
         fmt("peak xi %.4f, vg %.5f, M slope %.5f (%.2f%% <= 5%%), r_M %.6f, r_sigma %.6f (|r| >= 0.999)", xi_peak, vg,
             mf.slope, 100.0 * rel, mf.r, sf.r),
         tm.seconds());
}

void criterion_12() {
  Timer tm;
  bool pass = true;
  std::string detail;
  for (double m_sq : {0.0, 9.0}) {
    double coarse = 0.0, fine = 0.0;
    for (int level = 0; level < 2; ++level) {
      RunConfig c = constant_config(m_sq);
      c.T = 5.0;
      if (level == 1) {
        c.n_cells *= 2;
        c.dt /= 2.0;
      }
      c.stride = c.n_steps();
      const auto r = run_oracle_check(c);
      (level == 0 ? coarse : fine) = r.records.back().error;
      if (level == 0) detail += r.oracle + ": ";
    }
    pass = pass && coarse <= 1e-2 && fine < coarse;
    detail += fmt("%.2e -> %.2e  ", coarse, fine);
  }
  report(12, "oracle equivalence t=5", pass, detail + "(<= 1e-2 at h=0.05, dt=0.01; decreasing)", tm.seconds());
}

void criterion_13() {
  Timer tm;
  std::mt19937_64 rng(20240613);
  std::uniform_int_distribution<std::size_t> size(2, 200);
  std::uniform_real_distribution<double> u(-1.0, 1.0), extra(0.05, 3.0);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = size(rng);
    SymTridiagonal a(n);
    for (auto& o : a.off) o = u(rng);
    for (std::size_t i = 0; i < n; ++i)
      a.diag[i] = (i > 0 ? std::abs(a.off[i - 1]) : 0.0) + (i + 1 < n ? std::abs(a.off[i]) : 0.0) + extra(rng);
    std::vector<double> b(n);
    for (auto& v : b) v = nd(rng);
    const auto x_cg = cg_solve(a, b, std::vector<double>(n, 0.0)).x;
    const auto x_dir = thomas_solve(a, b);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num += (x_cg[i] - x_dir[i]) * (x_cg[i] - x_dir[i]);
      den += x_dir[i] * x_dir[i];
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  report(13, "CG vs direct solver", worst <= 1e-9, fmt("100 instances n <= 200: max relative difference %.2e (<= 1e-9)", worst),
         tm.seconds());
}

}  // namespace

int main() {
  void (*criteria[])() = {criterion_1, criterion_2, criterion_3, criterion_4,  criterion_5,  criterion_6, criterion_7,
                          criterion_8, criterion_9, criterion_10, criterion_11, criterion_12, criterion_13};
  for (auto* c : criteria) {
    try {
      c();
    } catch (const std::exception& e) {
      std::printf("[FAIL] criterion aborted: %s\n", e.what());
      ++g_failed;
    }
  }
  std::printf("%d of 13 criteria failed\n", g_failed);
  return g_failed == 0 ? 0 : 1;
}
