#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "kgstep/tridiagonal.hpp"

namespace kgstep::test {

using Dense = std::vector<std::vector<double>>;

inline Dense to_dense(const SymTridiagonal& a) {
  const std::size_t n = a.size();
  Dense m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    m[i][i] = a.diag[i];
    if (i + 1 < n) m[i][i + 1] = m[i + 1][i] = a.off[i];
  }
  return m;
}

/// Dense Cholesky; false as soon as a pivot is not positive.
inline bool cholesky_ok(Dense m) {
  const std::size_t n = m.size();
  for (std::size_t j = 0; j < n; ++j) {
    double s = m[j][j];
    for (std::size_t k = 0; k < j; ++k) s -= m[j][k] * m[j][k];
    if (!(s > 0.0)) return false;
    const double l = std::sqrt(s);
    m[j][j] = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double t = m[i][j];
      for (std::size_t k = 0; k < j; ++k) t -= m[i][k] * m[j][k];
      m[i][j] = t / l;
    }
  }
  return true;
}

/// Random diagonally dominant SPD tridiagonal matrix.
inline SymTridiagonal random_spd(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> off(-1.0, 1.0), extra(0.1, 2.0);
  SymTridiagonal a(n);
  for (std::size_t i = 0; i + 1 < n; ++i) a.off[i] = off(rng);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    if (i > 0) s += std::abs(a.off[i - 1]);
    if (i + 1 < n) s += std::abs(a.off[i]);
    a.diag[i] = s + extra(rng);
  }
  return a;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

}  // namespace kgstep::test
