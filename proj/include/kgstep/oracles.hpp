#pragma once

#include <fftw3.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kgstep/error.hpp"
#include "kgstep/mesh.hpp"

namespace kgstep {

/// omega(xi) = sqrt(m^2 + c^2 xi^2)
inline double dispersion(double xi, double c, double m_sq) { return std::sqrt(m_sq + c * c * xi * xi); }

/// omega'(xi) = c^2 xi / sqrt(m^2 + c^2 xi^2); the m^2 = 0, xi = 0 limit is taken as 0.
inline double group_velocity(double xi, double c, double m_sq) {
  if (xi == 0.0) return 0.0;
  return c * c * xi / dispersion(xi, c, m_sq);
}

/// Stationary-phase support [omega'(xi1) t, omega'(xi2) t] of a packet with band [xi1, xi2].
inline std::pair<double, double> essential_support_interval(double xi1, double xi2, double c, double m_sq,
                                                            double t) {
  if (!(xi1 < xi2)) throw InvalidArgument("frequency band must satisfy xi1 < xi2");
  if (t < 0.0) throw InvalidArgument("time must be nonnegative");
  return {group_velocity(xi1, c, m_sq) * t, group_velocity(xi2, c, m_sq) * t};
}

/// Free wave equation solution
///   1/2 [u0(x+ct) + u0(x-ct)] + 1/(2c) int_{x-ct}^{x+ct} v0(y) dy
/// with adaptive Gauss-Kronrod quadrature for the velocity term.
template <class U0, class V0>
double dalembert_solution(U0&& u0, V0&& v0, double c, double t, double x) {
  if (!(c > 0.0)) throw InvalidArgument("wave speed must be positive");
  const double a = x - c * t, b = x + c * t;
  double integral = 0.0;
  if (b != a) {
    using boost::math::quadrature::gauss_kronrod;
    integral = gauss_kronrod<double, 15>::integrate([&](double y) { return v0(y); }, a, b, 15, 1e-13);
  }
  return 0.5 * (u0(b) + u0(a)) + integral / (2.0 * c);
}

/// Periodic sampling grid x_k = -half_span + k dx, k = 0..n-1, for spectral reference solutions.
struct FourierGrid {
  std::size_t n_points = 0;
  double spacing = 0.0;
  double half_span = 0.0;

  double x(std::size_t k) const { return -half_span + static_cast<double>(k) * spacing; }

  /// Angular frequency of DFT bin k in the standard layout (negative frequencies in the upper half).
  double xi(std::size_t k) const {
    const auto n = static_cast<long>(n_points);
    long kk = static_cast<long>(k);
    if (kk >= (n + 1) / 2) kk -= n;
    return 2.0 * std::numbers::pi * static_cast<double>(kk) / (static_cast<double>(n) * spacing);
  }

  std::vector<double> positions() const {
    std::vector<double> out(n_points);
    for (std::size_t k = 0; k < n_points; ++k) out[k] = x(k);
    return out;
  }
};

/// Power-of-two grid whose spacing divides the mesh spacing, covering at
/// least twice the number of mesh nodes, so every mesh node is a grid point.
inline FourierGrid make_fourier_grid(const Mesh1D& mesh, int refine = 1) {
  if (refine < 1) throw InvalidArgument("grid refinement must be at least 1");
  FourierGrid g;
  g.spacing = mesh.h() / refine;
  std::size_t n = 2;
  const std::size_t needed = 2 * mesh.n_nodes() * static_cast<std::size_t>(refine);
  while (n < needed) n *= 2;
  g.n_points = n;
  g.half_span = 0.5 * static_cast<double>(n) * g.spacing;
  return g;
}

/// Grid values at the mesh nodes (grid built by make_fourier_grid for this mesh).
inline std::vector<double> restrict_to_mesh(const FourierGrid& grid, std::span<const double> samples,
                                            const Mesh1D& mesh) {
  if (samples.size() != grid.n_points) throw InvalidArgument("sample count does not match the grid");
  const double offset = (grid.half_span - mesh.half_length()) / grid.spacing;
  const long k0 = std::lround(offset);
  const long step = std::lround(mesh.h() / grid.spacing);
  if (std::abs(offset - static_cast<double>(k0)) > 1e-6 ||
      std::abs(mesh.h() / grid.spacing - static_cast<double>(step)) > 1e-9 || k0 < 0 ||
      static_cast<std::size_t>(k0 + step * mesh.n_cells()) >= grid.n_points)
    throw InvalidArgument("mesh nodes are not aligned with the Fourier grid");
  std::vector<double> out(mesh.n_nodes());
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = samples[static_cast<std::size_t>(k0 + step * static_cast<long>(j))];
  return out;
}

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};

/// In-place complex DFT of fixed size (unnormalized in both directions).
class Fft {
 public:
  explicit Fft(std::size_t n) : n_(n), buf_(fftw_alloc_complex(n)) {
    if (!buf_) throw OracleError("FFTW allocation failed");
    std::lock_guard lock(fftw_planner_mutex());
    fwd_ = fftw_plan_dft_1d(static_cast<int>(n), buf_.get(), buf_.get(), FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_1d(static_cast<int>(n), buf_.get(), buf_.get(), FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~Fft() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  std::vector<std::complex<double>> forward(std::span<const double> x) {
    for (std::size_t k = 0; k < n_; ++k) {
      buf_.get()[k][0] = x[k];
      buf_.get()[k][1] = 0.0;
    }
    fftw_execute(fwd_);
    return read();
  }

  /// Inverse DFT including the 1/n factor.
  std::vector<std::complex<double>> inverse(std::span<const std::complex<double>> spec) {
    for (std::size_t k = 0; k < n_; ++k) {
      buf_.get()[k][0] = spec[k].real();
      buf_.get()[k][1] = spec[k].imag();
    }
    fftw_execute(bwd_);
    auto out = read();
    for (auto& v : out) v /= static_cast<double>(n_);
    return out;
  }

 private:
  std::vector<std::complex<double>> read() const {
    std::vector<std::complex<double>> out(n_);
    for (std::size_t k = 0; k < n_; ++k) out[k] = {buf_.get()[k][0], buf_.get()[k][1]};
    return out;
  }

  std::size_t n_;
  std::unique_ptr<fftw_complex[], FftwFree> buf_;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

/// Fraction of sum u^2 carried by the `cells` samples nearest each end of the grid.
inline double edge_mass_fraction(std::span<const double> u, std::size_t cells) {
  double total = 0.0, edge = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double e = u[k] * u[k];
    total += e;
    if (k < cells || k + cells >= u.size()) edge += e;
  }
  return total > 0.0 ? edge / total : 0.0;
}

}  // namespace detail

/// Exact solution of u_tt - c^2 u_xx + m^2 u = 0 on the periodic Fourier grid:
///   u^(t) = cos(omega t) f^ + sin(omega t) / omega g^,  omega = sqrt(m^2 + c^2 xi^2),
/// with sin(omega t)/omega -> t at omega = 0. The transform pair is normalized so
/// that t = 0 returns f exactly.
class ConstantPotentialPropagator {
 public:
  static constexpr std::size_t kEdgeCells = 8;
  static constexpr double kEdgeMassLimit = 1e-8;

  ConstantPotentialPropagator(FourierGrid grid, std::span<const double> f, std::span<const double> g,
                              double m_sq, double c)
      : grid_(grid), m_sq_(m_sq), c_(c), fft_(std::make_unique<detail::Fft>(grid.n_points)) {
    if (f.size() != grid.n_points || (!g.empty() && g.size() != grid.n_points))
      throw InvalidArgument("initial samples do not match the Fourier grid");
    if (m_sq < 0.0) throw InvalidArgument("constant potential must be nonnegative");
    if (!(c > 0.0)) throw InvalidArgument("wave speed must be positive");
    check_edges(f, "initial displacement");
    if (!g.empty()) check_edges(g, "initial velocity");
    f_hat_ = fft_->forward(f);
    if (g.empty())
      g_hat_.assign(grid.n_points, {0.0, 0.0});
    else
      g_hat_ = fft_->forward(g);
    omega_.resize(grid.n_points);
    for (std::size_t k = 0; k < grid.n_points; ++k) omega_[k] = dispersion(grid.xi(k), c, m_sq);
  }

  const FourierGrid& grid() const noexcept { return grid_; }

  /// u(t, x_k) on the grid.
  std::vector<double> field(double t) {
    std::vector<std::complex<double>> spec(grid_.n_points);
    for (std::size_t k = 0; k < spec.size(); ++k) {
      const double w = omega_[k];
      const double s = w > 0.0 ? std::sin(w * t) / w : t;
      spec[k] = std::cos(w * t) * f_hat_[k] + s * g_hat_[k];
    }
    return to_real(spec, "propagated field");
  }

  /// u_t(t, x_k) on the grid.
  std::vector<double> velocity(double t) {
    std::vector<std::complex<double>> spec(grid_.n_points);
    for (std::size_t k = 0; k < spec.size(); ++k) {
      const double w = omega_[k];
      spec[k] = -w * std::sin(w * t) * f_hat_[k] + std::cos(w * t) * g_hat_[k];
    }
    return to_real(spec, "propagated velocity");
  }

  /// integral of (u_t^2 + c^2 u_x^2 + m^2 u^2), evaluated by Parseval.
  double spectral_energy(double t) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < grid_.n_points; ++k) {
      const double w = omega_[k];
      const double s = w > 0.0 ? std::sin(w * t) / w : t;
      const auto u = std::cos(w * t) * f_hat_[k] + s * g_hat_[k];
      const auto ut = -w * std::sin(w * t) * f_hat_[k] + std::cos(w * t) * g_hat_[k];
      acc += std::norm(ut) + w * w * std::norm(u);
    }
    return acc * grid_.spacing / static_cast<double>(grid_.n_points);
  }

  /// Largest |Im u| / max |u| seen by the last inverse transform.
  double last_imaginary_residue() const noexcept { return imag_residue_; }

 private:
  void check_edges(std::span<const double> u, const std::string& what) const {
    const double frac = detail::edge_mass_fraction(u, kEdgeCells);
    if (frac > kEdgeMassLimit)
      throw OracleError(what + " reaches the edge of the Fourier grid (edge mass fraction " + std::to_string(frac) +
                        "); aliasing would corrupt the reference");
  }

  std::vector<double> to_real(std::span<const std::complex<double>> spec, const std::string& what) {
    const auto u = fft_->inverse(spec);
    std::vector<double> out(u.size());
    double max_re = 0.0, max_im = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      out[k] = u[k].real();
      max_re = std::max(max_re, std::abs(u[k].real()));
      max_im = std::max(max_im, std::abs(u[k].imag()));
    }
    imag_residue_ = max_re > 0.0 ? max_im / max_re : max_im;
    check_edges(out, what);
    return out;
  }

  FourierGrid grid_;
  double m_sq_;
  double c_;
  std::unique_ptr<detail::Fft> fft_;
  std::vector<std::complex<double>> f_hat_;
  std::vector<std::complex<double>> g_hat_;
  std::vector<double> omega_;
  double imag_residue_ = 0.0;
};

/// Positive frequency carrying the largest |DFT| of the samples.
inline double spectral_peak(const FourierGrid& grid, std::span<const double> samples) {
  if (samples.size() != grid.n_points) throw InvalidArgument("sample count does not match the grid");
  detail::Fft fft(grid.n_points);
  const auto spec = fft.forward(samples);
  double best = -1.0, peak = 0.0;
  for (std::size_t k = 1; k < grid.n_points / 2; ++k) {
    const double a = std::abs(spec[k]);
    if (a > best) {
      best = a;
      peak = grid.xi(k);
    }
  }
  return peak;
}

/// Narrow-band packet moving to the right.
///
/// The spectrum is a gaussian of standard deviation sigma_xi (for |u|^2)
/// around carrier xi0, restricted to positive frequencies, and the packet is
/// sampled as if it had already travelled for `age` time units from a focus,
/// so its spread is in the linear (stationary-phase) regime from t = 0.
/// `center` is where the packet's group moves through at t = 0. Samples are
/// scaled to unit peak displacement.
struct RightMovingPacket {
  double carrier = 3.0;
  double sigma_xi = 0.5;
  double age = 20.0;
  double center = -3.0;
};

struct SampledInitialData {
  std::vector<double> displacement;
  std::vector<double> velocity;
};

inline SampledInitialData sample_right_moving_packet(const FourierGrid& grid, const RightMovingPacket& p,
                                                     double c, double m_sq) {
  if (!(p.sigma_xi > 0.0)) throw InvalidArgument("packet bandwidth must be positive");
  const double focus = p.center - group_velocity(p.carrier, c, m_sq) * p.age;
  std::vector<std::complex<double>> a(grid.n_points), at(grid.n_points);
  const double x0 = grid.x(0);
  for (std::size_t k = 0; k < grid.n_points; ++k) {
    const double xi = grid.xi(k);
    if (xi <= 0.0) continue;
    const double w = dispersion(xi, c, m_sq);
    const double env = std::exp(-(xi - p.carrier) * (xi - p.carrier) / (4.0 * p.sigma_xi * p.sigma_xi));
    a[k] = env * std::polar(1.0, -xi * (focus - x0) - w * p.age);
    at[k] = std::complex<double>(0.0, -w) * a[k];
  }
  detail::Fft fft(grid.n_points);
  const auto u = fft.inverse(a);
  const auto v = fft.inverse(at);
  double peak = 0.0;
  for (const auto& z : u) peak = std::max(peak, 2.0 * std::abs(z.real()));
  const double scale = peak > 0.0 ? 1.0 / peak : 1.0;
  SampledInitialData out;
  out.displacement.resize(grid.n_points);
  out.velocity.resize(grid.n_points);
  for (std::size_t k = 0; k < grid.n_points; ++k) {
    out.displacement[k] = 2.0 * scale * u[k].real();
    out.velocity[k] = 2.0 * scale * v[k].real();
  }
  return out;
}

}  // namespace kgstep
