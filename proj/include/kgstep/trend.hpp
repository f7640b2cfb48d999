#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgstep/error.hpp"

namespace kgstep {

enum class KernelKind { epanechnikov, gaussian, moving_average };

inline std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::epanechnikov: return "epanechnikov";
    case KernelKind::gaussian: return "gaussian";
    case KernelKind::moving_average: return "moving_average";
  }
  return "?";
}

inline KernelKind kernel_from_string(const std::string& s) {
  if (s == "epanechnikov") return KernelKind::epanechnikov;
  if (s == "gaussian") return KernelKind::gaussian;
  if (s == "moving_average") return KernelKind::moving_average;
  throw InvalidArgument("unknown kernel '" + s + "' (expected epanechnikov, gaussian or moving_average)");
}

/// bandwidth <= 0 selects the default of 20 sample spacings.
struct SmoothingSpec {
  KernelKind kernel = KernelKind::epanechnikov;
  double bandwidth = 0.0;
};

struct TimeWindow {
  double lo = -INFINITY;
  double hi = INFINITY;
};

struct RegressionResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  int n_points = 0;
  bool degenerate = false;  // y constant over the window, r reported as 0
};

namespace detail {

inline void check_series(std::span<const double> t, std::span<const double> y) {
  if (t.size() != y.size())
    throw InvalidArgument("time and value arrays differ in length (" + std::to_string(t.size()) + " vs " +
                          std::to_string(y.size()) + ")");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) throw InvalidArgument("time stamps must be strictly increasing");
}

inline double mean_spacing(std::span<const double> t) {
  return t.size() < 2 ? 0.0 : (t.back() - t.front()) / static_cast<double>(t.size() - 1);
}

inline double kernel_weight(KernelKind k, double u) {
  switch (k) {
    case KernelKind::epanechnikov: return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    case KernelKind::moving_average: return std::abs(u) <= 1.0 ? 0.5 : 0.0;
    case KernelKind::gaussian: return std::abs(u) <= 8.0 ? std::exp(-0.5 * u * u) : 0.0;
  }
  return 0.0;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace detail

inline double resolve_bandwidth(std::span<const double> t, const SmoothingSpec& spec) {
  return spec.bandwidth > 0.0 ? spec.bandwidth : 20.0 * detail::mean_spacing(t);
}

/// Nadaraya-Watson smoother: y_i <- sum_j K((t_j - t_i)/bw) y_j / sum_j K(...).
inline std::vector<double> kernel_smooth(std::span<const double> t, std::span<const double> y,
                                         const SmoothingSpec& spec) {
  detail::check_series(t, y);
  if (t.size() < 2) return {y.begin(), y.end()};
  const double bw = resolve_bandwidth(t, spec);
  const double spacing = detail::mean_spacing(t);
  if (!(bw >= 2.0 * spacing * (1.0 - 1e-12)))
    throw InvalidArgument("smoothing bandwidth " + std::to_string(bw) + " is below two sample spacings (" +
                          std::to_string(2.0 * spacing) + ")");
  const double reach = spec.kernel == KernelKind::gaussian ? 8.0 * bw : bw;
  std::vector<double> out(t.size());
  std::size_t lo = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    while (t[lo] < t[i] - reach) ++lo;
    double num = 0.0, den = 0.0;
    for (std::size_t j = lo; j < t.size() && t[j] <= t[i] + reach; ++j) {
      const double w = detail::kernel_weight(spec.kernel, (t[j] - t[i]) / bw);
      num += w * y[j];
      den += w;
    }
    out[i] = num / den;
  }
  return out;
}

/// Ordinary least squares y = slope * t + intercept over the samples with t in [lo, hi].
inline RegressionResult linear_fit(std::span<const double> t, std::span<const double> y, TimeWindow window = {}) {
  detail::check_series(t, y);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] >= window.lo && t[i] <= window.hi) idx.push_back(i);
  if (idx.size() < 2)
    throw InvalidArgument("linear fit needs at least 2 points in the window, got " + std::to_string(idx.size()));

  const double n = static_cast<double>(idx.size());
  double tm = 0.0, ym = 0.0;
  for (auto i : idx) {
    tm += t[i];
    ym += y[i];
  }
  tm /= n;
  ym /= n;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (auto i : idx) {
    const double dt = t[i] - tm, dy = y[i] - ym;
    stt += dt * dt;
    sty += dt * dy;
    syy += dy * dy;
  }
  RegressionResult res;
  res.n_points = static_cast<int>(idx.size());
  res.t_lo = t[idx.front()];
  res.t_hi = t[idx.back()];
  res.slope = sty / stt;
  res.intercept = ym - res.slope * tm;
  if (syy == 0.0) {
    res.r = 0.0;
    res.degenerate = true;
  } else {
    res.r = std::clamp(sty / std::sqrt(stt * syy), -1.0, 1.0);
  }
  return res;
}

/// Fits log(y) = slope * t + intercept (exponential trend); y must be positive in the window.
inline RegressionResult log_linear_fit(std::span<const double> t, std::span<const double> y, TimeWindow window = {}) {
  detail::check_series(t, y);
  std::vector<double> ly(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool inside = t[i] >= window.lo && t[i] <= window.hi;
    if (inside && !(y[i] > 0.0)) throw InvalidArgument("log-linear fit needs positive values");
    ly[i] = inside ? std::log(y[i]) : 0.0;
  }
  return linear_fit(t, ly, window);
}

/// First upward crossing of level, linearly interpolated between samples.
inline std::optional<double> crossing_time(std::span<const double> t, std::span<const double> y, double level) {
  detail::check_series(t, y);
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    if (y[i] < level && y[i + 1] >= level) {
      const double frac = (level - y[i]) / (y[i + 1] - y[i]);
      return t[i] + frac * (t[i + 1] - t[i]);
    }
  }
  return std::nullopt;
}

/// Where a series settles after the impact on the barrier.
struct SettleTimes {
  std::optional<double> onset;  // first departure from the pre-impact rate
  std::optional<double> end;    // last departure from the late-time rate
};

/// Finds the disturbed stretch of a series from its smoothed derivative.
/// Only interior samples (one bandwidth away from both ends) are used so the
/// one-sided kernel near the edges does not register as a disturbance. A
/// sample counts as disturbed when its rate departs from the reference rate
/// by more than max(5 x pre-impact noise, 5% of the largest departure).
inline SettleTimes settle_times(std::span<const double> t, std::span<const double> y, const SmoothingSpec& spec) {
  detail::check_series(t, y);
  SettleTimes out;
  if (t.size() < 16) return out;
  const double bw = resolve_bandwidth(t, spec);
  const auto ys = kernel_smooth(t, y, spec);

  std::vector<double> ti, d;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t.front() + bw || t[i] > t.back() - bw) continue;
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = i + 1 == t.size() ? i : i + 1;
    ti.push_back(t[i]);
    d.push_back((ys[b] - ys[a]) / (t[b] - t[a]));
  }
  const std::size_t n = ti.size();
  if (n < 8) return out;

  const std::size_t k = std::max<std::size_t>(3, n / 20);
  const double r_pre = detail::median({d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k)});
  // Noise is scatter about a local line, so a gently curving lead-in does not count.
  const auto lead = linear_fit(std::span(ti).first(k), std::span(d).first(k));
  double noise = 0.0;
  for (std::size_t i = 0; i < k; ++i) noise = std::max(noise, std::abs(d[i] - (lead.slope * ti[i] + lead.intercept)));
  const double r_post = detail::median({d.end() - static_cast<std::ptrdiff_t>(n / 4), d.end()});

  double peak_pre = 0.0, peak_post = 0.0;
  for (double v : d) {
    peak_pre = std::max(peak_pre, std::abs(v - r_pre));
    peak_post = std::max(peak_post, std::abs(v - r_post));
  }
  const double thr_pre = std::max(5.0 * noise, 0.05 * peak_pre);
  const double thr_post = std::max(5.0 * noise, 0.05 * peak_post);
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(d[i] - r_pre) > thr_pre) {
      out.onset = ti[i];
      break;
    }
  for (std::size_t i = n; i-- > 0;)
    if (std::abs(d[i] - r_post) > thr_post) {
      out.end = ti[i];
      break;
    }
  return out;
}

struct ImpactWindow {
  std::optional<double> onset;
  double impact_end = 0.0;
  TimeWindow fit;
  std::string rule;  // which criterion set impact_end
};

/// Post-shock regression window [impact_end, t_end].
///
/// impact_end is the later of the settle times of the smoothed standard
/// deviation and of the smoothed mean. When neither settles early enough to
/// leave a tenth of the record, the window starts halfway between the
/// onset and the end of the record.
inline ImpactWindow detect_post_impact_window(std::span<const double> t, std::span<const double> sigma,
                                              std::span<const double> mean, const SmoothingSpec& spec) {
  detail::check_series(t, sigma);
  detail::check_series(t, mean);
  if (t.size() < 2) throw InvalidArgument("window detection needs at least two samples");
  ImpactWindow w;
  const auto s = settle_times(t, sigma, spec);
  const auto m = settle_times(t, mean, spec);
  w.onset = s.onset ? s.onset : m.onset;

  const double t0 = t.front(), t1 = t.back();
  std::optional<double> end;
  if (s.end) {
    end = s.end;
    w.rule = "sigma-settle";
  }
  if (m.end && (!end || *m.end > *end)) {
    end = m.end;
    w.rule = "mean-settle";
  }
  if (!end || t1 - *end < 0.1 * (t1 - t0)) {
    const double from = w.onset.value_or(t0);
    end = 0.5 * (from + t1);
    w.rule = "midpoint-fallback";
  }
  w.impact_end = *end;
  w.fit = {*end, t1};
  return w;
}

}  // namespace kgstep
