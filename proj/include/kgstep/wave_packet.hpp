#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "kgstep/error.hpp"

namespace kgstep {

enum class PacketShape {
  squared_gaussian,  // amplitude * x^2 * gaussian, vanishes at x = 0
  gaussian,          // amplitude * gaussian, used to exercise the jump check
};

/// Initial wave packet f and its right-moving velocity g = -c f'.
/// Defaults give f(x) = x^2 exp(-(x+3)^2/2) / (10 sqrt(2 pi)), which has unit integral.
struct WavePacketSpec {
  double amplitude = 1.0 / (10.0 * std::sqrt(2.0 * std::numbers::pi));
  double center = -3.0;
  double width = 1.0;
  double c = 1.0;
  PacketShape shape = PacketShape::squared_gaussian;

  void validate() const {
    if (!(width > 0.0)) throw InvalidArgument("packet width must be positive");
    if (!(amplitude > 0.0)) throw InvalidArgument("packet amplitude must be positive");
    if (!(c > 0.0)) throw InvalidArgument("packet wave speed must be positive");
  }
};

namespace detail {

struct PacketTerms {
  double p, dp, d2p;  // polynomial prefactor and its derivatives
  double q;           // (log gaussian)'
  double q_prime;
  double envelope;
};

inline PacketTerms packet_terms(const WavePacketSpec& s, double x) {
  const double w2 = s.width * s.width;
  const double y = x - s.center;
  PacketTerms t{};
  if (s.shape == PacketShape::squared_gaussian) {
    t.p = x * x;
    t.dp = 2.0 * x;
    t.d2p = 2.0;
  } else {
    t.p = 1.0;
    t.dp = 0.0;
    t.d2p = 0.0;
  }
  t.q = -y / w2;
  t.q_prime = -1.0 / w2;
  t.envelope = std::exp(-0.5 * y * y / w2);
  return t;
}

}  // namespace detail

inline double eval_f(const WavePacketSpec& s, double x) {
  const auto t = detail::packet_terms(s, x);
  return s.amplitude * t.p * t.envelope;
}

inline double eval_f_prime(const WavePacketSpec& s, double x) {
  const auto t = detail::packet_terms(s, x);
  return s.amplitude * (t.dp + t.p * t.q) * t.envelope;
}

inline double eval_f_second(const WavePacketSpec& s, double x) {
  const auto t = detail::packet_terms(s, x);
  return s.amplitude * (t.d2p + 2.0 * t.dp * t.q + t.p * t.q_prime + t.p * t.q * t.q) * t.envelope;
}

/// Initial velocity -c f'(x). For the default packet this is
/// x (x^2 + 3x - 2) exp(-(x+3)^2/2) / (10 sqrt(2 pi)).
inline double eval_g(const WavePacketSpec& s, double x) { return -s.c * eval_f_prime(s, x); }

/// f^(omega) = integral of f(x) exp(-i omega x) dx by the trapezoidal rule
/// over center +- 14 widths (spectrally accurate for gaussian envelopes).
inline std::complex<double> fourier_transform(const WavePacketSpec& s, double omega) {
  const double half_span = 14.0 * s.width;
  const int n = 4096;
  const double dx = 2.0 * half_span / n;
  std::complex<double> acc{0.0, 0.0};
  for (int k = 0; k <= n; ++k) {
    const double x = s.center - half_span + k * dx;
    const double w = (k == 0 || k == n) ? 0.5 : 1.0;
    acc += w * eval_f(s, x) * std::polar(1.0, -omega * x);
  }
  return acc * dx;
}

/// |f^| on a frequency grid with at least 16 points per unit frequency.
inline std::vector<double> fourier_magnitude(const WavePacketSpec& s, std::span<const double> omega_grid) {
  s.validate();
  if (omega_grid.size() < 2) throw InvalidArgument("frequency grid needs at least two points");
  for (std::size_t k = 1; k < omega_grid.size(); ++k) {
    const double step = omega_grid[k] - omega_grid[k - 1];
    if (!(step > 0.0)) throw InvalidArgument("frequency grid must be strictly increasing");
    if (step > 1.0 / 16.0 + 1e-12)
      throw InvalidArgument("frequency grid too coarse: spacing " + std::to_string(step) +
                            " exceeds 1/16 (need 16 points per unit frequency)");
  }
  std::vector<double> mag(omega_grid.size());
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(fourier_transform(s, omega_grid[k]));
  return mag;
}

/// Heuristic barrier height above which the packet tunnels instead of
/// climbing: the square of the packet's central value.
inline double classical_threshold(const WavePacketSpec& s) { return s.center * s.center; }

struct TransmissionReport {
  double f_at_zero = 0.0;
  double jump_f = 0.0;               // f(0+) - f(0-)
  double jump_df = 0.0;              // f'(0+) - f'(0-)
  double jump_condition_residual = 0.0;  // f''(0+) - f''(0-) - (a2 / c^2) f(0)
  bool pass = false;
};

/// Checks that f lies in the domain needed for a second-order accurate run:
/// continuity of f and f' across x = 0 and the second-derivative jump
/// f''(0+) - f''(0-) = (a2 / c^2) f(0).
inline TransmissionReport check_transmission_conditions(const WavePacketSpec& s, double a2, double c,
                                                        double tol = 1e-14) {
  s.validate();
  if (!(c > 0.0)) throw InvalidArgument("wave speed must be positive");
  // f is given by one smooth formula on both sides, so one-sided limits coincide.
  const double left = eval_f(s, -0.0), right = eval_f(s, 0.0);
  const double dleft = eval_f_prime(s, -0.0), dright = eval_f_prime(s, 0.0);
  const double d2left = eval_f_second(s, -0.0), d2right = eval_f_second(s, 0.0);
  TransmissionReport r;
  r.f_at_zero = right;
  r.jump_f = right - left;
  r.jump_df = dright - dleft;
  r.jump_condition_residual = (d2right - d2left) - a2 / (c * c) * right;
  r.pass = std::abs(r.jump_f) <= tol && std::abs(r.jump_df) <= tol && std::abs(r.jump_condition_residual) <= tol;
  return r;
}

}  // namespace kgstep
