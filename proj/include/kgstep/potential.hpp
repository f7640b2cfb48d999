#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgstep/error.hpp"

namespace kgstep {

/// Piecewise-constant potential a(x). values[k] applies on
/// (breakpoints[k-1], breakpoints[k]) with the outer intervals unbounded.
class PotentialProfile {
 public:
  PotentialProfile(std::vector<double> breakpoints, std::vector<double> values)
      : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
    if (values_.size() != breakpoints_.size() + 1)
      throw InvalidArgument("potential needs one value per interval (" +
                            std::to_string(breakpoints_.size() + 1) + " expected, got " +
                            std::to_string(values_.size()) + ")");
    for (std::size_t k = 0; k < breakpoints_.size(); ++k) {
      if (!std::isfinite(breakpoints_[k]))
        throw InvalidArgument("potential breakpoint is not finite");
      if (k > 0 && !(breakpoints_[k] > breakpoints_[k - 1]))
        throw InvalidArgument("potential breakpoints must be strictly increasing");
    }
    for (double v : values_)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw InvalidArgument("potential values must be finite and nonnegative, got " +
                              std::to_string(v));
  }

  static PotentialProfile constant(double a) { return {{}, {a}}; }

  /// a1 on x < 0, a2 on x > 0.
  static PotentialProfile step(double a1, double a2) { return {{0.0}, {a1, a2}}; }

  /// a1 outside [x_start, x_end], height inside.
  static PotentialProfile barrier(double a1, double x_start, double x_end, double height) {
    return {{x_start, x_end}, {a1, height, a1}};
  }

  std::span<const double> breakpoints() const noexcept { return breakpoints_; }
  std::span<const double> values() const noexcept { return values_; }

  /// Value on the open interval containing x. At a breakpoint the right value wins.
  double value_at(double x) const {
    auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x);
    return values_[static_cast<std::size_t>(it - breakpoints_.begin())];
  }

  bool is_constant() const {
    return std::all_of(values_.begin(), values_.end(),
                       [&](double v) { return v == values_.front(); });
  }

  std::optional<double> constant_value() const {
    if (!is_constant()) return std::nullopt;
    return values_.front();
  }

 private:
  std::vector<double> breakpoints_;
  std::vector<double> values_;
};

}  // namespace kgstep
