#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "engagedyn/error.hpp"

namespace engagedyn::numkit {

struct PeriodogramBin {
  double frequency = 0.0;  // cycles per sample
  double power = 0.0;
};

/// Raw periodogram |DFT_j|^2 / n of the mean-removed series at Fourier
/// frequencies j/n, j = 1..floor(n/2). Direct O(n^2) transform over an exact
/// twiddle table indexed by (j*t mod n).
inline std::vector<PeriodogramBin> periodogram(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 4) throw InvalidInput("periodogram: need at least 4 samples");
  double mean = 0.0;
  for (double v : series) {
    if (!std::isfinite(v)) throw InvalidInput("periodogram: non-finite value");
    mean += v;
  }
  mean /= static_cast<double>(n);
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = series[t] - mean;

  std::vector<double> cs(n), sn(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    cs[k] = std::cos(a);
    sn[k] = std::sin(a);
  }
  std::vector<PeriodogramBin> out;
  out.reserve(n / 2);
  for (std::size_t j = 1; j <= n / 2; ++j) {
    double re = 0.0, im = 0.0;
    std::size_t idx = 0;
    for (std::size_t t = 0; t < n; ++t) {
      re += x[t] * cs[idx];
      im -= x[t] * sn[idx];
      idx += j;
      if (idx >= n) idx -= n;
    }
    out.push_back({static_cast<double>(j) / static_cast<double>(n), (re * re + im * im) / static_cast<double>(n)});
  }
  return out;
}

/// Chi-square survival function P(X > x) via the regularized upper incomplete gamma.
inline double chi2_sf(double x, long dof) {
  if (!std::isfinite(x) && x != std::numeric_limits<double>::infinity())
    throw InvalidInput("chi2_sf: non-finite statistic");
  if (dof < 1) throw InvalidInput("chi2_sf: dof must be >= 1");
  if (x < 0.0) throw InvalidInput("chi2_sf: statistic must be >= 0");
  if (x == 0.0) return 1.0;
  if (x == std::numeric_limits<double>::infinity()) return 0.0;
  return boost::math::gamma_q(0.5 * static_cast<double>(dof), 0.5 * x);
}

}  // namespace engagedyn::numkit
