#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kgstep/error.hpp"
#include "kgstep/tridiagonal.hpp"

namespace kgstep {

struct CgOptions {
  double rel_tolerance = 1e-10;
  int max_iterations = 0;  // 0 means 10 * n
  bool jacobi = false;     // diagonal preconditioning

  void validate() const {
    if (!(rel_tolerance > 0.0 && rel_tolerance < 1.0))
      throw InvalidArgument("CG relative tolerance must lie in (0, 1), got " +
                            std::to_string(rel_tolerance));
    if (max_iterations < 0)
      throw InvalidArgument("CG max_iterations must be positive (or 0 for the default)");
  }

  int iteration_limit(std::size_t n) const {
    return max_iterations > 0 ? max_iterations : static_cast<int>(10 * std::max<std::size_t>(n, 1));
  }
};

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  double final_residual = 0.0;  // ||b - A x|| / ||b||
};

/// Called after every iteration with (iteration, current iterate, relative residual).
using CgMonitor = std::function<void(int, std::span<const double>, double)>;

/// Conjugate gradient for an SPD tridiagonal system.
///
/// Stops when the recursively updated residual satisfies
/// ||r|| <= rel_tolerance * ||b||; the reported residual is recomputed from
/// scratch. A zero right-hand side returns x = 0 without iterating.
inline CgResult cg_solve(const SymTridiagonal& a, std::span<const double> b,
                         std::span<const double> x0, const CgOptions& opts = {},
                         const CgMonitor& monitor = {}) {
  opts.validate();
  const std::size_t n = a.size();
  if (b.size() != n || x0.size() != n)
    throw InvalidArgument("cg_solve dimension mismatch: matrix " + std::to_string(n) + ", rhs " +
                          std::to_string(b.size()) + ", guess " + std::to_string(x0.size()));

  CgResult res;
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    res.x.assign(n, 0.0);
    return res;
  }

  std::vector<double> inv_diag;
  if (opts.jacobi) {
    inv_diag.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!(a.diag[i] > 0.0)) throw SolverError("Jacobi preconditioner needs a positive diagonal", 0.0, 0);
      inv_diag[i] = 1.0 / a.diag[i];
    }
  }
  auto precondition = [&](std::span<const double> r, std::span<double> z) {
    if (opts.jacobi)
      for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    else
      std::copy(r.begin(), r.end(), z.begin());
  };

  res.x.assign(x0.begin(), x0.end());
  std::vector<double> r(n), z(n), p(n), q(n);
  a.apply(res.x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];

  double rnorm = norm2(r);
  const double target = opts.rel_tolerance * bnorm;
  const int limit = opts.iteration_limit(n);

  if (rnorm > target) {
    precondition(r, z);
    p = z;
    double rz = dot(r, z);
    while (res.iterations < limit) {
      ++res.iterations;
      a.apply(p, q);
      const double pq = dot(p, q);
      if (!(pq > 0.0))
        throw SolverError("CG breakdown: matrix is not positive definite (p^T A p = " +
                              std::to_string(pq) + ")",
                          rnorm / bnorm, res.iterations);
      const double alpha = rz / pq;
      axpy(alpha, p, res.x);
      axpy(-alpha, q, r);
      rnorm = norm2(r);
      if (monitor) monitor(res.iterations, res.x, rnorm / bnorm);
      if (rnorm <= target) break;
      precondition(r, z);
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
  }

  a.apply(res.x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
  res.final_residual = norm2(r) / bnorm;
  if (rnorm > target)
    throw SolverError("CG did not converge in " + std::to_string(res.iterations) +
                          " iterations (relative residual " + std::to_string(res.final_residual) + ")",
                      res.final_residual, res.iterations);
  return res;
}

/// Direct solve by forward elimination and back substitution.
inline std::vector<double> thomas_solve(const SymTridiagonal& a, std::span<const double> b) {
  const std::size_t n = a.size();
  if (b.size() != n)
    throw InvalidArgument("thomas_solve dimension mismatch: matrix " + std::to_string(n) + ", rhs " +
                          std::to_string(b.size()));
  std::vector<double> x(b.begin(), b.end());
  if (n == 0) return x;

  double scale = 0.0;
  for (double d : a.diag) scale = std::max(scale, std::abs(d));
  for (double o : a.off) scale = std::max(scale, std::abs(o));
  const double tiny = scale * 1e-14;

  std::vector<double> cprime(n);
  double pivot = a.diag[0];
  if (std::abs(pivot) <= tiny) throw SolverError("zero pivot at row 0", 0.0, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      pivot = a.diag[i] - a.off[i - 1] * cprime[i - 1];
      if (std::abs(pivot) <= tiny)
        throw SolverError("zero pivot at row " + std::to_string(i), 0.0, 0);
      x[i] = (x[i] - a.off[i - 1] * x[i - 1]) / pivot;
    } else {
      x[0] /= pivot;
    }
    if (i + 1 < n) cprime[i] = a.off[i] / pivot;
  }
  for (std::size_t i = n - 1; i-- > 0;) x[i] -= cprime[i] * x[i + 1];
  return x;
}

}  // namespace kgstep
