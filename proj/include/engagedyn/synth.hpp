#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "engagedyn/data.hpp"
#include "engagedyn/gompertz_model.hpp"

namespace engagedyn::synth {

/// Seeded generator. Uniform and normal transforms are written out here so a
/// seed reproduces the same stream on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix(seed)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (one variate per call).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do r = engine_();
    while (r >= limit);
    return static_cast<std::size_t>(r % n);
  }

  /// Independent child stream; results do not depend on draw order elsewhere.
  Rng split(std::uint64_t stream) const { return Rng(mix(seed_ ^ mix(stream + 0x9E3779B97F4A7C15ULL))); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Gompertz view curves

struct GompertzNoise {
  double sigma = 0.0;     // absolute, views
  double relative = 0.0;  // multiplicative, fraction of the model value
};

/// Cumulative views v(t), t = 0..T-1, from the generalized Gompertz model with
/// truncated Gaussian observation noise: each day's draw is resampled until
/// the series stays non-negative and non-decreasing.
inline TimeSeries gen_gompertz(const gompertz::Params& params, int horizon, const GompertzNoise& noise, Rng& rng,
                               Date start = {2020, 1, 1}) {
  if (horizon < 1) throw InvalidInput("gen_gompertz: horizon must be >= 1");
  if (noise.sigma < 0.0 || noise.relative < 0.0) throw InvalidInput("gen_gompertz: noise must be >= 0");
  gompertz::validate(params, static_cast<double>(horizon));
  TimeSeries out{start, {}, SeriesKind::cumulative};
  out.values.reserve(static_cast<std::size_t>(horizon));
  double prev = 0.0;
  for (int t = 0; t < horizon; ++t) {
    const double mean = gompertz::eval_model(params, t);
    const double sd = noise.sigma + noise.relative * mean;
    double v = mean;
    if (sd > 0.0) {
      int tries = 0;
      do v = mean + sd * rng.normal();
      while (v < prev && ++tries < 1000);
      if (v < prev) v = prev;
    }
    out.values.push_back(v);
    prev = v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subscriber / view channels

enum class ViewKind { white, ar1, bursts, impulse };

struct ViewProcess {
  ViewKind kind = ViewKind::white;
  double mean = 100.0;
  double sd = 10.0;
  double phi = 0.5;        // ar1 coefficient
  int period = 7;          // bursts: spacing
  double height = 100.0;   // bursts / impulse magnitude
  long impulse_day = 10;   // impulse: day index in the returned series
};

inline constexpr int kBurnIn = 100;

/// Simulates s(t) = intercept + sum a_k s(t-k) + sum b_k v(t-k) + eps(t)
/// driven by the chosen view process. The first kBurnIn steps are discarded.
inline ChannelSeries gen_granger_channel(const std::vector<double>& a, const std::vector<double>& b,
                                         const ViewProcess& vp, int T, double noise_sigma, Rng& rng,
                                         const std::string& channel_id = "c1", Date start = {2020, 1, 1},
                                         double intercept = 0.0) {
  for (double x : a)
    if (!(std::abs(x) < 1.0)) throw InvalidInput("gen_granger_channel: |a_i| must be < 1");
  for (double x : b)
    if (!(std::abs(x) < 1.0)) throw InvalidInput("gen_granger_channel: |b_i| must be < 1");
  if (T < 1) throw InvalidInput("gen_granger_channel: T must be >= 1");
  if (vp.kind == ViewKind::ar1 && !(std::abs(vp.phi) < 1.0))
    throw InvalidInput("gen_granger_channel: AR(1) view process needs |phi| < 1");
  if (!a.empty()) {
    const auto p = static_cast<Eigen::Index>(a.size());
    Matrix companion = Matrix::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) companion(0, i) = a[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
    const double radius = Eigen::EigenSolver<Matrix>(companion, false).eigenvalues().cwiseAbs().maxCoeff();
    if (radius >= 1.0)
      throw NumericalError("gen_granger_channel: explosive subscriber recursion (spectral radius " +
                           std::to_string(radius) + ")");
  }

  const int total = T + kBurnIn;
  std::vector<double> v(static_cast<std::size_t>(total)), s(static_cast<std::size_t>(total), 0.0);
  double ar_state = 0.0;
  for (int t = 0; t < total; ++t) {
    double x = 0.0;
    switch (vp.kind) {
      case ViewKind::white: x = vp.mean + vp.sd * rng.normal(); break;
      case ViewKind::ar1:
        ar_state = vp.phi * ar_state + vp.sd * rng.normal();
        x = vp.mean + ar_state;
        break;
      case ViewKind::bursts:
        x = vp.mean + vp.sd * rng.normal() + ((t - kBurnIn) % vp.period == 0 ? vp.height : 0.0);
        break;
      case ViewKind::impulse: x = (t - kBurnIn == vp.impulse_day) ? vp.height : 0.0; break;
    }
    v[static_cast<std::size_t>(t)] = std::max(0.0, x);
  }
  for (int t = 0; t < total; ++t) {
    double acc = intercept + (noise_sigma > 0.0 ? noise_sigma * rng.normal() : 0.0);
    for (std::size_t k = 1; k <= a.size(); ++k)
      if (t - static_cast<int>(k) >= 0) acc += a[k - 1] * s[static_cast<std::size_t>(t) - k];
    for (std::size_t k = 1; k <= b.size(); ++k)
      if (t - static_cast<int>(k) >= 0) acc += b[k - 1] * v[static_cast<std::size_t>(t) - k];
    s[static_cast<std::size_t>(t)] = acc;
  }

  ChannelSeries ch;
  ch.channel_id = channel_id;
  ch.category = "unknown";
  for (int t = 0; t < T; ++t) {
    ch.dates.push_back(start.plus_days(t));
    ch.subscribers.push_back(s[static_cast<std::size_t>(t + kBurnIn)]);
    ch.views.push_back(v[static_cast<std::size_t>(t + kBurnIn)]);
    ch.uploads.push_back(0.0);
  }
  return ch;
}

// ---------------------------------------------------------------------------
// Upload schedules

struct ScheduleSample {
  std::vector<double> uploads;  // 0/1 per day
  std::vector<long> on_schedule_days;
  std::vector<long> off_schedule_days;
};

/// Uploads on days 0, P, 2P, ... each moved one day earlier or later with
/// probability jitter_prob, plus extra uploads on otherwise empty days with
/// daily probability off_schedule_prob.
inline ScheduleSample gen_schedule(int period, double jitter_prob, double off_schedule_prob, int T, Rng& rng) {
  if (period < 2) throw InvalidInput("gen_schedule: period must be >= 2");
  if (T < 10 * period) throw InvalidInput("gen_schedule: T must be >= 10 * period");
  ScheduleSample out;
  out.uploads.assign(static_cast<std::size_t>(T), 0.0);
  for (long d = 0; d < T; d += period) {
    long day = d;
    if (rng.bernoulli(jitter_prob)) {
      long shift = rng.bernoulli(0.5) ? 1 : -1;
      if (day + shift < 0 || day + shift >= T) shift = -shift;
      if (day + shift >= 0 && day + shift < T) day += shift;
    }
    out.uploads[static_cast<std::size_t>(day)] = 1.0;
    out.on_schedule_days.push_back(day);
  }
  for (long d = 0; d < T; ++d) {
    const bool extra = rng.bernoulli(off_schedule_prob);
    if (extra && out.uploads[static_cast<std::size_t>(d)] == 0.0) {
      out.uploads[static_cast<std::size_t>(d)] = 1.0;
      out.off_schedule_days.push_back(d);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Meta-level feature regression sets

enum class Link { linear, additive_sigmoid, multiplicative };

struct LinkSpec {
  Link kind = Link::additive_sigmoid;
  double steepness = 5.0;  // additive_sigmoid: sum of 1 / (1 + exp(-s (x - 0.5)))
};

inline double apply_link(const LinkSpec& link, const Eigen::Ref<const Vector>& x, const std::vector<int>& relevant) {
  double y = link.kind == Link::multiplicative ? 1.0 : 0.0;
  for (int j : relevant) {
    const double v = x(j);
    switch (link.kind) {
      case Link::linear: y += v; break;
      case Link::additive_sigmoid: y += 1.0 / (1.0 + std::exp(-link.steepness * (v - 0.5))); break;
      case Link::multiplicative: y *= 0.5 + v; break;
    }
  }
  return y;
}

/// n samples of m features uniform on [0, 1]; the target depends only on the
/// `relevant` columns (0-based) through the link, plus Gaussian noise.
inline FeatureTable gen_feature_dataset(int n, int m, const std::vector<int>& relevant, const LinkSpec& link,
                                        double noise_sigma, Rng& rng) {
  if (n < 50) throw InvalidInput("gen_feature_dataset: n must be >= 50");
  if (m < 1) throw InvalidInput("gen_feature_dataset: m must be >= 1");
  for (int j : relevant)
    if (j < 0 || j >= m) throw InvalidInput("gen_feature_dataset: relevant index out of range");
  FeatureTable t;
  for (int j = 0; j < m; ++j) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "x%02d", j + 1);
    t.names.emplace_back(buf);
  }
  t.X.resize(n, m);
  t.y.resize(n);
  for (int i = 0; i < n; ++i) {
    t.ids.push_back("v" + std::to_string(i + 1));
    for (int j = 0; j < m; ++j) t.X(i, j) = rng.uniform();
    t.y(i) = apply_link(link, t.X.row(i).transpose(), relevant) + noise_sigma * rng.normal();
  }
  return t;
}

}  // namespace engagedyn::synth
