#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kgstep/error.hpp"
#include "kgstep/linear_solver.hpp"
#include "kgstep/mesh.hpp"
#include "kgstep/tridiagonal.hpp"

namespace kgstep {

struct NewmarkParams {
  double beta = 0.25;
  double gamma = 0.5;
  double dt = 0.01;
  long n_steps = 0;

  // dt may be negative (backward runs); it only has to be a usable number.
  void validate() const {
    if (!std::isfinite(dt) || dt == 0.0) throw InvalidArgument("time step must be finite and nonzero");
    if (!std::isfinite(beta) || !std::isfinite(gamma))
      throw InvalidArgument("Newmark beta and gamma must be finite");
    if (n_steps < 0) throw InvalidArgument("number of steps must be nonnegative");
  }
};

/// Displacement and velocity coefficients at t = step * dt.
struct SolverState {
  long step = 0;
  std::vector<double> C;
  std::vector<double> D;
  double t = 0.0;
};

enum class LinearSolverKind { cg, direct };

/// E = 1/2 D^T G D + 1/2 C^T A C
inline double discrete_energy(const SymTridiagonal& g, const SymTridiagonal& a, std::span<const double> c,
                              std::span<const double> d) {
  if (c.size() != a.size() || d.size() != g.size())
    throw InvalidArgument("discrete_energy dimension mismatch");
  return 0.5 * g.quadratic_form(d) + 0.5 * a.quadratic_form(c);
}

/// Two-field Newmark recursion on the coefficient vectors:
///
///   (G + beta dt^2 A) C+ = G (C + dt D) - dt^2 (1/2 - beta) A C
///   G D+ = G D - dt A (gamma C+ + (1 - gamma) C)
///
/// The shifted matrix is built once; every step performs two SPD solves.
class NewmarkIntegrator {
 public:
  NewmarkIntegrator(SymTridiagonal g, SymTridiagonal a, NewmarkParams params, CgOptions opts = {},
                    LinearSolverKind solver = LinearSolverKind::cg)
      : g_(std::move(g)), a_(std::move(a)), params_(params), opts_(opts), solver_(solver) {
    params_.validate();
    opts_.validate();
    if (g_.size() != a_.size()) throw InvalidArgument("mass and bilinear matrices differ in size");
    shifted_ = g_.combine(1.0, a_, params_.beta * params_.dt * params_.dt);
  }

  const SymTridiagonal& mass() const noexcept { return g_; }
  const SymTridiagonal& bilinear() const noexcept { return a_; }
  const NewmarkParams& params() const noexcept { return params_; }

  double energy(const SolverState& s) const { return discrete_energy(g_, a_, s.C, s.D); }

  /// Advance one step in place.
  void step(SolverState& s) const {
    const std::size_t n = g_.size();
    if (s.C.size() != n || s.D.size() != n)
      throw InvalidArgument("state size " + std::to_string(s.C.size()) + "/" + std::to_string(s.D.size()) +
                            " does not match matrices of size " + std::to_string(n));
    const double dt = params_.dt;
    const double beta = params_.beta;
    const double gamma = params_.gamma;

    std::vector<double> predictor(s.C);
    axpy(dt, s.D, predictor);
    std::vector<double> rhs = g_ * predictor;
    const std::vector<double> ac = a_ * s.C;
    axpy(-dt * dt * (0.5 - beta), ac, rhs);
    std::vector<double> c_next = solve(shifted_, rhs, predictor, s.step);

    std::vector<double> blend(n);
    for (std::size_t i = 0; i < n; ++i) blend[i] = gamma * c_next[i] + (1.0 - gamma) * s.C[i];
    std::vector<double> rhs_d = g_ * s.D;
    axpy(-dt, a_ * blend, rhs_d);
    std::vector<double> d_next = solve(g_, rhs_d, s.D, s.step);

    s.C = std::move(c_next);
    s.D = std::move(d_next);
    ++s.step;
    s.t = static_cast<double>(s.step) * dt;
  }

 private:
  std::vector<double> solve(const SymTridiagonal& m, std::span<const double> b, std::span<const double> guess,
                            long step_index) const {
    try {
      if (solver_ == LinearSolverKind::direct) return thomas_solve(m, b);
      return cg_solve(m, b, guess, opts_).x;
    } catch (const SolverError& e) {
      throw SolverError(std::string(e.what()) + " at step " + std::to_string(step_index), e.residual(),
                        e.iterations(), step_index);
    }
  }

  SymTridiagonal g_;
  SymTridiagonal a_;
  NewmarkParams params_;
  CgOptions opts_;
  LinearSolverKind solver_;
  SymTridiagonal shifted_;
};

/// One step of the scheme from an explicit state, building the shifted matrix on the fly.
inline SolverState newmark_step(const SolverState& state, const SymTridiagonal& g, const SymTridiagonal& a,
                                const NewmarkParams& p, const CgOptions& opts = {}) {
  NewmarkIntegrator integrator(g, a, p, opts);
  SolverState next = state;
  integrator.step(next);
  return next;
}

/// Callback invoked on states whose step index is a multiple of stride, and on the final state.
struct StateObserver {
  std::function<void(const SolverState&)> on_state;
  long stride = 1;
};

/// Runs p.n_steps steps from (C0, D0) and returns the final state.
inline SolverState run_simulation(const NewmarkIntegrator& integrator, std::vector<double> c0,
                                  std::vector<double> d0, std::span<const StateObserver> observers = {}) {
  for (const auto& o : observers)
    if (o.stride < 1) throw InvalidArgument("observer stride must be at least 1");
  SolverState s{0, std::move(c0), std::move(d0), 0.0};
  if (s.C.size() != integrator.mass().size() || s.D.size() != integrator.mass().size())
    throw InvalidArgument("initial data size does not match the discretization");

  const long n_steps = integrator.params().n_steps;
  auto notify = [&](bool final) {
    for (const auto& o : observers)
      if (o.on_state && (s.step % o.stride == 0 || final)) o.on_state(s);
  };
  notify(n_steps == 0);
  for (long n = 0; n < n_steps; ++n) {
    integrator.step(s);
    notify(s.step == n_steps);
  }
  return s;
}

inline SolverState run_simulation(const Mesh1D& mesh, const SymTridiagonal& g, const SymTridiagonal& a,
                                  std::vector<double> c0, std::vector<double> d0, const NewmarkParams& p,
                                  const CgOptions& opts = {}, std::span<const StateObserver> observers = {},
                                  LinearSolverKind solver = LinearSolverKind::cg) {
  if (g.size() != mesh.n_nodes()) throw InvalidArgument("matrices do not match the mesh");
  NewmarkIntegrator integrator(g, a, p, opts, solver);
  return run_simulation(integrator, std::move(c0), std::move(d0), observers);
}

}  // namespace kgstep
