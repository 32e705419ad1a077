#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "engagedyn/data.hpp"
#include "engagedyn/numkit/spectral.hpp"

namespace engagedyn::schedule {

inline constexpr long kMinLength = 28;
inline constexpr long kMinUploads = 4;
inline constexpr double kDominanceRatio = 2.0;

struct Periodicity {
  double peak_ratio = 1.0;          // peak power / largest local max off the fundamental's harmonics
  double frequency = 0.0;           // fundamental, cycles/day
  long period = 0;                  // round(1 / frequency)
  bool dominant = false;            // peak_ratio > 2
  std::vector<numkit::PeriodogramBin> spectrum;
};

namespace detail {

inline long count_uploads(const std::vector<double>& uploads) {
  long n = 0;
  for (double u : uploads) {
    if (!std::isfinite(u) || u < 0.0) throw InvalidInput("schedule: upload counts must be finite and >= 0");
    if (u > 0.0) ++n;
  }
  return n;
}

}  // namespace detail

/// Periodogram of the mean-removed upload indicator. The fundamental is the
/// strongest bin, moved down to a subharmonic when a periodic comb spreads
/// its power over harmonics. The ratio compares the peak with the largest
/// local maximum not within one bin of a harmonic of the fundamental.
inline Periodicity periodicity(const std::vector<double>& uploads) {
  const long n = static_cast<long>(uploads.size());
  if (n < kMinLength) throw InsufficientData("dominant_schedule: series length must be >= 28 days");
  const long count = detail::count_uploads(uploads);
  if (count < kMinUploads)
    throw InsufficientData("dominant_schedule: need >= 4 uploads, got " + std::to_string(count));
  std::vector<double> ind(uploads.size());
  for (std::size_t i = 0; i < uploads.size(); ++i) ind[i] = uploads[i] > 0.0 ? 1.0 : 0.0;

  Periodicity out;
  out.spectrum = numkit::periodogram(ind);
  const auto& P = out.spectrum;
  const long m = static_cast<long>(P.size());
  auto power = [&](long j) { return (j >= 1 && j <= m) ? P[static_cast<std::size_t>(j - 1)].power : 0.0; };

  double mx = 0.0;
  for (const auto& b : P) mx = std::max(mx, b.power);
  if (!(mx > 0.0)) return out;  // uploads every day: no periodic structure
  // Lowest bin within rounding of the maximum.
  long jmax = 1;
  while (power(jmax) < mx * (1.0 - 1e-9)) ++jmax;

  // Subharmonic search, largest divisor first; period limited to n / 4. A
  // candidate must carry half the peak power and its harmonics must carry on
  // average 40% of it, which random spectra essentially never do.
  auto near = [&](long j) { return std::max({power(j - 1), power(j), power(j + 1)}); };
  auto comb_support = [&](long j0) {
    double s = 0.0;
    long h = 0;
    for (; h * j0 + j0 <= m; ++h) s += near((h + 1) * j0);
    return h > 0 ? s / static_cast<double>(h) : 0.0;
  };
  long j0 = jmax;
  for (long q = jmax / 4; q >= 2; --q) {
    const long jc = std::lround(static_cast<double>(jmax) / static_cast<double>(q));
    long best = 0;
    for (long j = jc - 1; j <= jc + 1; ++j)
      if (j >= 4 && power(j) >= 0.5 * mx && (best == 0 || power(j) > power(best))) best = j;
    if (best != 0 && comb_support(best) >= 0.4 * mx) {
      j0 = best;
      break;
    }
  }

  // A period beyond n / 4 repeats fewer than four times: only the peak's
  // neighbours are excluded and it cannot be dominant.
  const bool long_period = j0 < 4;
  std::vector<bool> excluded(static_cast<std::size_t>(m + 2), false);
  for (long h = 1; h * j0 - 1 <= m && (h == 1 || !long_period); ++h)
    for (long j = h * j0 - 1; j <= h * j0 + 1; ++j)
      if (j >= 1 && j <= m) excluded[static_cast<std::size_t>(j)] = true;
  double second = 0.0;
  for (long j = 1; j <= m; ++j) {
    if (excluded[static_cast<std::size_t>(j)]) continue;
    const double p = power(j);
    if (p >= power(j - 1) && p >= power(j + 1)) second = std::max(second, p);
  }
  out.peak_ratio = mx / std::max(second, 1e-12 * mx);
  out.frequency = P[static_cast<std::size_t>(j0 - 1)].frequency;
  out.period = std::lround(1.0 / out.frequency);
  out.dominant = !long_period && out.peak_ratio > kDominanceRatio;
  return out;
}

struct DominantSchedule {
  long period = 0;
  double peak_ratio = 0.0;
};

/// The schedule when the peak ratio exceeds 2, otherwise none.
inline std::optional<DominantSchedule> dominant_schedule(const std::vector<double>& uploads) {
  const Periodicity p = periodicity(uploads);
  if (!p.dominant) return std::nullopt;
  return DominantSchedule{p.period, p.peak_ratio};
}

/// Upload days that break a schedule of the given period. The anchor is the
/// modal upload phase (smallest on ties). An upload is off-schedule when its
/// circular phase distance to the anchor exceeds the tolerance, or when
/// another upload of the same period window sits closer to the anchor day
/// (earliest wins ties).
inline std::vector<long> off_schedule_events(const std::vector<double>& uploads, long period, long tolerance = 1) {
  if (period < 2) throw InvalidInput("off_schedule_events: period must be >= 2");
  if (tolerance < 0) throw InvalidInput("off_schedule_events: tolerance must be >= 0");
  std::vector<long> days;
  for (std::size_t d = 0; d < uploads.size(); ++d)
    if (uploads[d] > 0.0) days.push_back(static_cast<long>(d));
  if (days.empty()) return {};

  std::vector<long> hist(static_cast<std::size_t>(period), 0);
  for (long d : days) ++hist[static_cast<std::size_t>(d % period)];
  const long anchor = static_cast<long>(std::max_element(hist.begin(), hist.end()) - hist.begin());

  std::vector<long> off;
  std::map<long, std::pair<long, long>> served;  // window -> (distance, day)
  for (long d : days) {
    const long diff = (d % period - anchor + period) % period;
    const long dist = std::min(diff, period - diff);
    if (dist > tolerance) {
      off.push_back(d);
      continue;
    }
    const double k = std::round(static_cast<double>(d - anchor) / static_cast<double>(period));
    const long window = static_cast<long>(k);
    const long to_anchor = std::abs(d - (anchor + window * period));
    auto it = served.find(window);
    if (it == served.end()) {
      served.emplace(window, std::make_pair(to_anchor, d));
    } else if (to_anchor < it->second.first) {
      off.push_back(it->second.second);
      it->second = {to_anchor, d};
    } else {
      off.push_back(d);
    }
  }
  std::sort(off.begin(), off.end());
  return off;
}

struct SkippedEvent {
  long day = 0;
  std::string reason;  // window-truncated | zero-pre-views | zero-pre-comments
};

struct GainStats {
  long n_events = 0;
  std::vector<long> views_days;
  std::vector<double> views_gain;
  std::optional<double> fraction_views_gain;
  std::vector<long> comments_days;
  std::vector<double> comments_gain;
  std::optional<double> fraction_comments_gain;
  std::vector<SkippedEvent> skipped;
};

/// Per event d: mean over [d, d+w-1] divided by mean over [d-w, d-1].
inline GainStats off_schedule_gain(const ChannelSeries& ch, const std::vector<long>& events, long window = 7) {
  if (window < 1) throw InvalidInput("off_schedule_gain: window must be >= 1");
  const long T = static_cast<long>(ch.views.size());
  const bool has_comments = !ch.comments.empty();
  if (has_comments && static_cast<long>(ch.comments.size()) != T)
    throw InvalidInput("off_schedule_gain: comment series length differs from views");
  GainStats g;
  g.n_events = static_cast<long>(events.size());
  auto mean = [](const std::vector<double>& x, long a, long b) {
    double s = 0.0;
    for (long t = a; t <= b; ++t) s += x[static_cast<std::size_t>(t)];
    return s / static_cast<double>(b - a + 1);
  };
  long views_gain = 0, comments_gain = 0;
  for (long d : events) {
    if (d - window < 0 || d + window - 1 >= T) {
      g.skipped.push_back({d, "window-truncated"});
      continue;
    }
    const double pre = mean(ch.views, d - window, d - 1);
    if (pre > 0.0) {
      const double gain = mean(ch.views, d, d + window - 1) / pre;
      g.views_days.push_back(d);
      g.views_gain.push_back(gain);
      if (gain > 1.0) ++views_gain;
    } else {
      g.skipped.push_back({d, "zero-pre-views"});
    }
    if (has_comments) {
      const double cpre = mean(ch.comments, d - window, d - 1);
      if (cpre > 0.0) {
        const double gain = mean(ch.comments, d, d + window - 1) / cpre;
        g.comments_days.push_back(d);
        g.comments_gain.push_back(gain);
        if (gain > 1.0) ++comments_gain;
      } else {
        g.skipped.push_back({d, "zero-pre-comments"});
      }
    }
  }
  if (!g.views_gain.empty())
    g.fraction_views_gain = static_cast<double>(views_gain) / static_cast<double>(g.views_gain.size());
  if (!g.comments_gain.empty())
    g.fraction_comments_gain = static_cast<double>(comments_gain) / static_cast<double>(g.comments_gain.size());
  return g;
}

/// Mean uploads per day; channels above a caller-chosen ceiling (e.g. daily
/// re-uploads of copied content) can be filtered out of cohorts.
inline double upload_rate(const ChannelSeries& ch) {
  if (ch.uploads.empty()) return 0.0;
  double s = 0.0;
  for (double u : ch.uploads) s += u;
  return s / static_cast<double>(ch.uploads.size());
}

struct ScheduleReport {
  std::string channel_id;
  std::optional<long> dominant_period;
  double peak_ratio = 0.0;
  std::vector<long> events;
  GainStats gains;
};

inline ScheduleReport analyze_channel(const ChannelSeries& ch, long tolerance = 1, long window = 7) {
  ScheduleReport r;
  r.channel_id = ch.channel_id;
  const Periodicity p = periodicity(ch.uploads);
  r.peak_ratio = p.peak_ratio;
  if (p.dominant) {
    r.dominant_period = p.period;
    r.events = off_schedule_events(ch.uploads, p.period, tolerance);
    r.gains = off_schedule_gain(ch, r.events, window);
  }
  return r;
}

}  // namespace engagedyn::schedule
