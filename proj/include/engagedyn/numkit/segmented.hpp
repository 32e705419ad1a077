#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "engagedyn/error.hpp"

namespace engagedyn::numkit {

struct LineSegment {
  long start = 0;  // first index, inclusive
  long end = 0;    // last index, inclusive
  double slope = 0.0;
  double intercept = 0.0;  // value at index 0 of the whole series
  double sse = 0.0;

  double at(double t) const { return intercept + slope * t; }
};

struct SegmentedFit {
  /// First index of every segment after the first.
  std::vector<long> breakpoints;
  std::vector<LineSegment> segments;
  double sse = 0.0;
  double bic = 0.0;
};

namespace detail {

// O(1) least-squares line fits over index ranges from prefix sums. Sums use
// long double and a centered response to limit cancellation.
class LineCosts {
 public:
  explicit LineCosts(std::span<const double> y) : n_(static_cast<long>(y.size())) {
    long double mean = 0;
    for (double v : y) mean += v;
    mean_ = n_ ? mean / n_ : 0;
    sx_.assign(n_ + 1, 0);
    sxx_.assign(n_ + 1, 0);
    sy_.assign(n_ + 1, 0);
    syy_.assign(n_ + 1, 0);
    sxy_.assign(n_ + 1, 0);
    for (long i = 0; i < n_; ++i) {
      const long double x = i;
      const long double v = y[i] - mean_;
      sx_[i + 1] = sx_[i] + x;
      sxx_[i + 1] = sxx_[i] + x * x;
      sy_[i + 1] = sy_[i] + v;
      syy_[i + 1] = syy_[i] + v * v;
      sxy_[i + 1] = sxy_[i] + x * v;
    }
  }

  LineSegment fit(long a, long b) const {
    const long double m = b - a + 1;
    const long double sx = sx_[b + 1] - sx_[a], sxx = sxx_[b + 1] - sxx_[a];
    const long double sy = sy_[b + 1] - sy_[a], syy = syy_[b + 1] - syy_[a];
    const long double sxy = sxy_[b + 1] - sxy_[a];
    const long double vxx = sxx - sx * sx / m;
    const long double vxy = sxy - sx * sy / m;
    const long double vyy = syy - sy * sy / m;
    LineSegment seg;
    seg.start = a;
    seg.end = b;
    const long double slope = vxx > 0 ? vxy / vxx : 0;
    seg.slope = static_cast<double>(slope);
    seg.intercept = static_cast<double>((sy - slope * sx) / m + mean_);
    const long double sse = vxx > 0 ? vyy - vxy * vxy / vxx : vyy;
    seg.sse = sse > 0 ? static_cast<double>(sse) : 0.0;
    return seg;
  }

  double total_variation() const { return static_cast<double>(syy_[n_] - sy_[n_] * sy_[n_] / n_); }

 private:
  long n_;
  long double mean_;
  std::vector<long double> sx_, sxx_, sy_, syy_, sxy_;
};

}  // namespace detail

inline constexpr long kMinSegmentLength = 3;

/// Piecewise-linear fit with independent lines per segment. For each break
/// count 0..max_breaks the SSE-optimal placement is found exactly by dynamic
/// programming (segments of at least three points); the count with the lowest
/// BIC = n ln(SSE/n) + p ln n, p = 3*breaks + 2, is returned.
inline SegmentedFit segmented_regression(std::span<const double> series, int max_breaks) {
  const long n = static_cast<long>(series.size());
  if (max_breaks < 0) throw InvalidInput("segmented_regression: max_breaks must be >= 0");
  if (n < 2L * (max_breaks + 1) || n < kMinSegmentLength)
    throw InvalidInput("segmented_regression: series of length " + std::to_string(n) + " too short for " +
                       std::to_string(max_breaks) + " breaks");
  for (double v : series)
    if (!std::isfinite(v)) throw InvalidInput("segmented_regression: non-finite value");

  const detail::LineCosts costs(series);
  const long L = kMinSegmentLength;
  const int B = static_cast<int>(std::min<long>(max_breaks, n / L - 1));
  const double inf = std::numeric_limits<double>::infinity();

  // best[b][j]: min SSE covering [0, j] with b breaks; from[b][j]: start of last segment.
  std::vector<std::vector<double>> best(B + 1, std::vector<double>(n, inf));
  std::vector<std::vector<long>> from(B + 1, std::vector<long>(n, -1));
  for (long j = L - 1; j < n; ++j) {
    best[0][j] = costs.fit(0, j).sse;
    from[0][j] = 0;
  }
  for (int b = 1; b <= B; ++b) {
    for (long j = (b + 1) * L - 1; j < n; ++j) {
      for (long s = b * L; s + L - 1 <= j; ++s) {
        const double prev = best[b - 1][s - 1];
        if (prev == inf) continue;
        const double cand = prev + costs.fit(s, j).sse;
        if (cand < best[b][j]) {
          best[b][j] = cand;
          from[b][j] = s;
        }
      }
    }
  }

  // Floor keeps ln(SSE) finite on exact fits; identical floors favour fewer breaks.
  const double floor = std::max(1e-12 * costs.total_variation(), 1e-300);
  SegmentedFit out;
  double best_bic = inf;
  for (int b = 0; b <= B; ++b) {
    const double sse = best[b][n - 1];
    if (sse == inf) continue;
    const double p = 3.0 * b + 2.0;
    const double bic = n * std::log(std::max(sse, floor) / n) + p * std::log(static_cast<double>(n));
    if (bic < best_bic) {
      best_bic = bic;
      std::vector<long> starts;
      long j = n - 1;
      for (int k = b; k >= 0; --k) {
        const long s = from[k][j];
        starts.push_back(s);
        j = s - 1;
      }
      out.breakpoints.assign(starts.rbegin() + 1, starts.rend());
      out.segments.clear();
      for (std::size_t k = 0; k < starts.size(); ++k) {
        const long a = starts[starts.size() - 1 - k];
        const long e = k + 1 < starts.size() ? starts[starts.size() - 2 - k] - 1 : n - 1;
        out.segments.push_back(costs.fit(a, e));
      }
      out.sse = sse;
      out.bic = bic;
    }
  }
  return out;
}

/// Exact SSE for a fixed set of segment starts (breakpoints). Test oracles use this.
inline double segmented_sse(std::span<const double> series, const std::vector<long>& breakpoints) {
  const detail::LineCosts costs(series);
  const long n = static_cast<long>(series.size());
  double total = 0.0;
  long a = 0;
  for (std::size_t k = 0; k <= breakpoints.size(); ++k) {
    const long e = k < breakpoints.size() ? breakpoints[k] - 1 : n - 1;
    total += costs.fit(a, e).sse;
    if (k < breakpoints.size()) a = breakpoints[k];
  }
  return total;
}

}  // namespace engagedyn::numkit
