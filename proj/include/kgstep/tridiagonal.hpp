#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kgstep/error.hpp"

namespace kgstep {

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

/// Symmetric tridiagonal matrix stored as its diagonal and one off-diagonal.
struct SymTridiagonal {
  std::vector<double> diag;
  std::vector<double> off;

  SymTridiagonal() = default;
  explicit SymTridiagonal(std::size_t n) : diag(n, 0.0), off(n > 0 ? n - 1 : 0, 0.0) {}
  SymTridiagonal(std::vector<double> d, std::vector<double> o) : diag(std::move(d)), off(std::move(o)) {
    if (!diag.empty() && off.size() + 1 != diag.size())
      throw InvalidArgument("off-diagonal length must be n-1 (n=" + std::to_string(diag.size()) +
                            ", got " + std::to_string(off.size()) + ")");
    if (diag.empty() && !off.empty()) throw InvalidArgument("off-diagonal given for empty matrix");
  }

  std::size_t size() const noexcept { return diag.size(); }

  /// y = A x
  void apply(std::span<const double> x, std::span<double> y) const {
    const std::size_t n = size();
    if (x.size() != n || y.size() != n)
      throw InvalidArgument("matrix-vector dimension mismatch");
    if (n == 0) return;
    if (n == 1) {
      y[0] = diag[0] * x[0];
      return;
    }
    y[0] = diag[0] * x[0] + off[0] * x[1];
    for (std::size_t i = 1; i + 1 < n; ++i)
      y[i] = off[i - 1] * x[i - 1] + diag[i] * x[i] + off[i] * x[i + 1];
    y[n - 1] = off[n - 2] * x[n - 2] + diag[n - 1] * x[n - 1];
  }

  std::vector<double> operator*(std::span<const double> x) const {
    std::vector<double> y(size());
    apply(x, y);
    return y;
  }

  double quadratic_form(std::span<const double> x) const {
    const auto ax = (*this) * x;
    return dot(x, ax);
  }

  /// Returns alpha * this + beta * other.
  SymTridiagonal combine(double alpha, const SymTridiagonal& other, double beta) const {
    if (other.size() != size()) throw InvalidArgument("matrix size mismatch in combine");
    SymTridiagonal r(size());
    for (std::size_t i = 0; i < diag.size(); ++i) r.diag[i] = alpha * diag[i] + beta * other.diag[i];
    for (std::size_t i = 0; i < off.size(); ++i) r.off[i] = alpha * off[i] + beta * other.off[i];
    return r;
  }
};

}  // namespace kgstep
