#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgstep/error.hpp"

namespace kgstep {

/// Uniform grid on [-L, L] with m cells. m is even so that node m/2 sits
/// exactly on x = 0, where the potential is allowed to jump.
class Mesh1D {
 public:
  Mesh1D(double half_length, int n_cells) : half_length_(half_length), n_cells_(n_cells) {
    if (!(half_length > 0.0) || !std::isfinite(half_length))
      throw InvalidArgument("mesh half length must be positive, got " +
                            std::to_string(half_length));
    if (n_cells < 2)
      throw InvalidArgument("mesh needs at least 2 cells, got " + std::to_string(n_cells));
    if (n_cells % 2 != 0)
      throw InvalidArgument("mesh cell count must be even so x=0 is a node, got " +
                            std::to_string(n_cells));
    h_ = 2.0 * half_length / n_cells;
    nodes_.resize(static_cast<std::size_t>(n_cells) + 1);
    const int half = n_cells / 2;
    for (int j = 0; j <= n_cells; ++j)
      nodes_[static_cast<std::size_t>(j)] = static_cast<double>(j - half) * h_;
    nodes_.front() = -half_length;
    nodes_.back() = half_length;
  }

  double half_length() const noexcept { return half_length_; }
  int n_cells() const noexcept { return n_cells_; }
  std::size_t n_nodes() const noexcept { return nodes_.size(); }
  double h() const noexcept { return h_; }
  std::size_t center_index() const noexcept { return static_cast<std::size_t>(n_cells_ / 2); }

  std::span<const double> nodes() const noexcept { return nodes_; }
  double node(std::size_t j) const { return nodes_.at(j); }

  /// Index of the node at x, if x lies within rel_tol * h of one.
  std::optional<std::size_t> node_index(double x, double rel_tol = 1e-9) const {
    const double s = (x + half_length_) / h_;
    const double j = std::round(s);
    if (j < 0.0 || j > static_cast<double>(n_cells_)) return std::nullopt;
    if (std::abs(s - j) > rel_tol) return std::nullopt;
    return static_cast<std::size_t>(j);
  }

 private:
  double half_length_;
  int n_cells_;
  double h_ = 0.0;
  std::vector<double> nodes_;
};

inline Mesh1D build_mesh(double half_length, int n_cells) { return Mesh1D(half_length, n_cells); }

}  // namespace kgstep
