#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "kgstep/error.hpp"
#include "kgstep/mesh.hpp"
#include "kgstep/newmark.hpp"

namespace kgstep {

struct PositionMoments {
  double l2_sq = 0.0;     // integral of u^2
  double mean = 0.0;      // M
  double variance = 0.0;  // V
  double sigma = 0.0;     // sqrt(V)
};

struct MomentRecord {
  double t = 0.0;
  double l2_sq = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double sigma = 0.0;
  double energy = 0.0;
};

struct ObservableSeries {
  std::vector<MomentRecord> records;
  long stride = 1;

  std::vector<double> times() const { return column(&MomentRecord::t); }
  std::vector<double> means() const { return column(&MomentRecord::mean); }
  std::vector<double> sigmas() const { return column(&MomentRecord::sigma); }
  std::vector<double> energies() const { return column(&MomentRecord::energy); }

  std::vector<double> column(double MomentRecord::*field) const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.*field);
    return out;
  }
};

namespace detail {
// 3-point Gauss-Legendre on [0, 1]: exact through degree 5.
inline constexpr std::array<double, 3> kGaussS = {0.1127016653792583, 0.5, 0.8872983346207417};
inline constexpr std::array<double, 3> kGaussW = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

/// Sums weight(x) * u(x)^2 over all cells for the P1 interpolant u of c.
template <class W>
double weighted_l2(const Mesh1D& mesh, std::span<const double> c, W&& weight) {
  const auto x = mesh.nodes();
  const double h = mesh.h();
  double total = 0.0;
  for (std::size_t e = 0; e + 1 < x.size(); ++e) {
    double cell = 0.0;
    for (std::size_t q = 0; q < 3; ++q) {
      const double s = kGaussS[q];
      const double u = (1.0 - s) * c[e] + s * c[e + 1];
      cell += kGaussW[q] * weight(x[e] + s * h) * u * u;
    }
    total += cell * h;
  }
  return total;
}
}  // namespace detail

/// L2 norm, mean position, variance and standard deviation of the density
/// u^2 for the P1 field with nodal values c.
inline PositionMoments position_moments(const Mesh1D& mesh, std::span<const double> c) {
  if (c.size() != mesh.n_nodes()) throw InvalidArgument("coefficient vector does not match the mesh");
  PositionMoments m;
  m.l2_sq = detail::weighted_l2(mesh, c, [](double) { return 1.0; });
  if (!(m.l2_sq > 0.0)) throw InvalidArgument("cannot normalize a zero field");
  m.mean = detail::weighted_l2(mesh, c, [](double x) { return x; }) / m.l2_sq;
  const double mu = m.mean;
  m.variance = detail::weighted_l2(mesh, c, [mu](double x) { return (x - mu) * (x - mu); }) / m.l2_sq;
  m.sigma = std::sqrt(m.variance);
  return m;
}

/// ||u - v|| / ||v|| in L2 for two P1 fields on the same mesh.
inline double relative_l2_difference(const Mesh1D& mesh, std::span<const double> u, std::span<const double> v) {
  if (u.size() != mesh.n_nodes() || v.size() != mesh.n_nodes())
    throw InvalidArgument("coefficient vectors do not match the mesh");
  std::vector<double> d(u.size());
  for (std::size_t j = 0; j < d.size(); ++j) d[j] = u[j] - v[j];
  const auto one = [](double) { return 1.0; };
  const double ref = detail::weighted_l2(mesh, v, one);
  if (!(ref > 0.0)) throw InvalidArgument("reference field is zero");
  return std::sqrt(detail::weighted_l2(mesh, d, one) / ref);
}

/// Fraction of the squared L2 mass held in the outermost band_cells cells at either end.
inline double boundary_mass_fraction(const Mesh1D& mesh, std::span<const double> c, int band_cells = 10) {
  const double total = detail::weighted_l2(mesh, c, [](double) { return 1.0; });
  if (!(total > 0.0)) return 0.0;
  const double edge = mesh.half_length() - band_cells * mesh.h();
  const double outer = detail::weighted_l2(mesh, c, [edge](double x) { return std::abs(x) > edge ? 1.0 : 0.0; });
  return outer / total;
}

/// Accumulates one MomentRecord per observed state.
class SeriesRecorder {
 public:
  static constexpr double kLeakThreshold = 1e-6;

  SeriesRecorder(const Mesh1D& mesh, const NewmarkIntegrator& integrator, long stride)
      : mesh_(mesh), integrator_(integrator) {
    if (stride < 1) throw InvalidArgument("recording stride must be at least 1");
    series_.stride = stride;
  }

  StateObserver observer() {
    return {[this](const SolverState& s) { record(s); }, series_.stride};
  }

  void record(const SolverState& s) {
    const auto m = position_moments(mesh_, s.C);
    series_.records.push_back({s.t, m.l2_sq, m.mean, m.variance, m.sigma, integrator_.energy(s)});
    max_boundary_fraction_ = std::max(max_boundary_fraction_, boundary_mass_fraction(mesh_, s.C));
  }

  const ObservableSeries& series() const noexcept { return series_; }
  ObservableSeries take() { return std::move(series_); }
  double max_boundary_fraction() const noexcept { return max_boundary_fraction_; }
  bool leaked() const noexcept { return max_boundary_fraction_ > kLeakThreshold; }

 private:
  const Mesh1D& mesh_;
  const NewmarkIntegrator& integrator_;
  ObservableSeries series_;
  double max_boundary_fraction_ = 0.0;
};

}  // namespace kgstep
