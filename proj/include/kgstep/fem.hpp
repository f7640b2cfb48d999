#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <vector>

#include "kgstep/error.hpp"
#include "kgstep/linear_solver.hpp"
#include "kgstep/mesh.hpp"
#include "kgstep/potential.hpp"
#include "kgstep/tridiagonal.hpp"

namespace kgstep {

/// Gram matrix of the P1 hat basis: h/3 on boundary nodes, 2h/3 inside, h/6 off.
inline SymTridiagonal assemble_mass(const Mesh1D& mesh) {
  const double h = mesh.h();
  SymTridiagonal g(mesh.n_nodes());
  for (int e = 0; e < mesh.n_cells(); ++e) {
    const auto i = static_cast<std::size_t>(e);
    g.diag[i] += h / 3.0;
    g.diag[i + 1] += h / 3.0;
    g.off[i] += h / 6.0;
  }
  return g;
}

/// P1 stiffness matrix for the integral of u'v'.
inline SymTridiagonal assemble_stiffness(const Mesh1D& mesh) {
  const double inv_h = 1.0 / mesh.h();
  SymTridiagonal k(mesh.n_nodes());
  for (int e = 0; e < mesh.n_cells(); ++e) {
    const auto i = static_cast<std::size_t>(e);
    k.diag[i] += inv_h;
    k.diag[i + 1] += inv_h;
    k.off[i] -= inv_h;
  }
  return k;
}

/// Constant potential value on each cell. Every breakpoint must sit on a node
/// so that a(x) is constant per element.
inline std::vector<double> element_potential(const Mesh1D& mesh, const PotentialProfile& pot) {
  const double L = mesh.half_length();
  for (double b : pot.breakpoints()) {
    if (b < -L || b > L) {
      std::ostringstream os;
      os << "potential breakpoint " << b << " lies outside [" << -L << ", " << L << "]";
      throw InvalidArgument(os.str());
    }
    if (!mesh.node_index(b)) {
      std::ostringstream os;
      os << "potential breakpoint " << b << " is not a mesh node (h = " << mesh.h() << ")";
      throw InvalidArgument(os.str());
    }
  }
  std::vector<double> ae(static_cast<std::size_t>(mesh.n_cells()));
  const auto x = mesh.nodes();
  for (std::size_t e = 0; e < ae.size(); ++e) ae[e] = pot.value_at(0.5 * (x[e] + x[e + 1]));
  return ae;
}

/// Matrix of a(u, v) = c^2 (u', v') + (a(x) u, v) on the P1 space.
/// Element contribution: c^2/h [[1,-1],[-1,1]] + a_e h/6 [[2,1],[1,2]].
inline SymTridiagonal assemble_bilinear(const Mesh1D& mesh, double c, const PotentialProfile& pot) {
  if (!(c > 0.0) || !std::isfinite(c)) throw InvalidArgument("wave speed c must be positive");
  const auto ae = element_potential(mesh, pot);
  const double h = mesh.h();
  const double c2h = c * c / h;
  SymTridiagonal a(mesh.n_nodes());
  for (std::size_t e = 0; e < ae.size(); ++e) {
    a.diag[e] += c2h + ae[e] * h / 3.0;
    a.diag[e + 1] += c2h + ae[e] * h / 3.0;
    a.off[e] += -c2h + ae[e] * h / 6.0;
  }
  return a;
}

/// Nodal interpolant C_j = f(x_j).
template <class F>
std::vector<double> interpolate(const Mesh1D& mesh, F&& f) {
  std::vector<double> c(mesh.n_nodes());
  const auto x = mesh.nodes();
  for (std::size_t j = 0; j < c.size(); ++j) c[j] = f(x[j]);
  return c;
}

/// L2 projection onto the P1 space, load vector by 5-point Gauss per cell.
template <class F>
std::vector<double> project_l2(const Mesh1D& mesh, F&& f) {
  static constexpr std::array<double, 5> pts = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                                0.5384693101056831, 0.9061798459386640};
  static constexpr std::array<double, 5> wts = {0.2369268850561891, 0.4786286704993665,
                                                0.5688888888888889, 0.4786286704993665,
                                                0.2369268850561891};
  const double h = mesh.h();
  const auto x = mesh.nodes();
  std::vector<double> load(mesh.n_nodes(), 0.0);
  for (std::size_t e = 0; e + 1 < x.size(); ++e) {
    for (std::size_t q = 0; q < pts.size(); ++q) {
      const double s = 0.5 * (1.0 + pts[q]);
      const double fx = f(x[e] + s * h) * wts[q] * 0.5 * h;
      load[e] += (1.0 - s) * fx;
      load[e + 1] += s * fx;
    }
  }
  return thomas_solve(assemble_mass(mesh), load);
}

}  // namespace kgstep
