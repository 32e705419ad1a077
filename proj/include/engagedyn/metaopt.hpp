#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "engagedyn/data.hpp"

namespace engagedyn::metaopt {

inline constexpr long kHalfWindow = 6;       // windows span tau-6..tau and tau..tau+6
inline constexpr long kNoChangeDay = 90;     // pseudo-event for videos never optimized
inline constexpr long kNoChangeMinDays = 97;
inline constexpr long kDefaultMinTrafficEvents = 600;

struct OptSensitivity {
  MetaOptEvent event;
  bool no_change = false;
  double s = 0.0;
  double pre_mean = 0.0;
  double post_mean = 0.0;
  bool valid = false;
  std::string reason;  // window-truncated | zero-pre-views when invalid
};

struct WindowRatio {
  double ratio = 0.0, pre = 0.0, post = 0.0;
  bool valid = false;
  std::string reason;
};

/// Mean views over [tau, tau+6] divided by the mean over [tau-6, tau]; the
/// event day sits in both windows. `disjoint` uses [tau-7, tau-1] instead.
inline WindowRatio window_ratio(std::span<const double> v, long tau, bool disjoint = false) {
  WindowRatio w;
  const long n = static_cast<long>(v.size());
  const long pre_a = disjoint ? tau - kHalfWindow - 1 : tau - kHalfWindow;
  const long pre_b = disjoint ? tau - 1 : tau;
  const long post_b = tau + kHalfWindow;
  if (pre_a < 0 || post_b >= n) {
    w.reason = "window-truncated";
    return w;
  }
  double pre = 0.0, post = 0.0;
  for (long t = pre_a; t <= pre_b; ++t) pre += v[static_cast<std::size_t>(t)];
  for (long t = tau; t <= post_b; ++t) post += v[static_cast<std::size_t>(t)];
  w.pre = pre / 7.0;
  w.post = post / 7.0;
  if (!(w.pre > 0.0)) {
    w.reason = "zero-pre-views";
    return w;
  }
  w.ratio = w.post / w.pre;
  w.valid = true;
  return w;
}

inline OptSensitivity opt_sensitivity(const VideoRecord& video, const MetaOptEvent& event, bool disjoint = false) {
  OptSensitivity o;
  o.event = event;
  const WindowRatio w = window_ratio(video.daily_views.values, event.day, disjoint);
  o.s = w.ratio;
  o.pre_mean = w.pre;
  o.post_mean = w.post;
  o.valid = w.valid;
  o.reason = w.reason;
  return o;
}

// ---------------------------------------------------------------------------
// Cohorts

enum class KindFilter { title, thumbnail, keyword, no_change, all };

inline std::string_view to_string(KindFilter k) {
  switch (k) {
    case KindFilter::title: return "title";
    case KindFilter::thumbnail: return "thumbnail";
    case KindFilter::keyword: return "keyword";
    case KindFilter::no_change: return "no-change";
    case KindFilter::all: return "all";
  }
  return "?";
}

inline std::optional<KindFilter> parse_kind_filter(std::string_view s) {
  if (s == "title") return KindFilter::title;
  if (s == "thumbnail") return KindFilter::thumbnail;
  if (s == "keyword") return KindFilter::keyword;
  if (s == "no-change") return KindFilter::no_change;
  if (s == "all") return KindFilter::all;
  return std::nullopt;
}

/// Time-sensitive content left out of cohorts; matching is case-insensitive
/// on the category and on whole keywords.
struct Exclusions {
  std::vector<std::string> categories{"politics", "movies-and-trailers"};
  std::vector<std::string> keywords{"holiday", "movie", "trailers"};
};

inline std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

inline bool excluded(const VideoRecord& v, const Exclusions& ex) {
  const std::string cat = lower(v.category);
  for (const auto& c : ex.categories)
    if (cat == lower(c)) return true;
  for (const auto& k : v.keywords) {
    const std::string kw = lower(k);
    for (const auto& e : ex.keywords)
      if (kw == lower(e)) return true;
  }
  return false;
}

struct CohortOptions {
  KindFilter kind = KindFilter::all;
  Exclusions exclusions;
  bool disjoint = false;
};

/// Events of the cohort in video order: real events matching the filter, or
/// for no-change a pseudo-event at day 90 of every video without events that
/// is at least 97 days long.
inline std::vector<OptSensitivity> cohort_events(const Dataset& ds, const CohortOptions& opt, long* n_excluded = nullptr,
                                                 long* n_too_short = nullptr) {
  std::vector<OptSensitivity> out;
  long ex = 0, short_ = 0;
  for (const auto& v : ds.videos) {
    if (excluded(v, opt.exclusions)) {
      ++ex;
      continue;
    }
    if (opt.kind == KindFilter::no_change) {
      if (!v.events.empty()) continue;
      if (static_cast<long>(v.daily_views.values.size()) < kNoChangeMinDays) {
        ++short_;
        continue;
      }
      OptSensitivity o = opt_sensitivity(v, {v.video_id, kNoChangeDay, OptKind::title}, opt.disjoint);
      o.no_change = true;
      out.push_back(std::move(o));
      continue;
    }
    for (const auto& e : v.events) {
      const bool match = opt.kind == KindFilter::all || to_string(e.kind) == to_string(opt.kind);
      if (match) out.push_back(opt_sensitivity(v, e, opt.disjoint));
    }
  }
  if (n_excluded) *n_excluded = ex;
  if (n_too_short) *n_too_short = short_;
  return out;
}

struct CohortFraction {
  KindFilter kind = KindFilter::all;
  long n_events = 0;
  long n_valid = 0;
  long n_gain = 0;
  long n_excluded_videos = 0;
  long n_too_short = 0;  // no-change videos under 97 days
  double fraction_gain = 0.0;  // over valid events
  std::map<std::string, long> invalid_reasons;
  std::vector<OptSensitivity> events;
};

inline CohortFraction cohort_fraction(const Dataset& ds, const CohortOptions& opt = {}) {
  CohortFraction c;
  c.kind = opt.kind;
  c.events = cohort_events(ds, opt, &c.n_excluded_videos, &c.n_too_short);
  c.n_events = static_cast<long>(c.events.size());
  for (const auto& e : c.events) {
    if (!e.valid) {
      ++c.invalid_reasons[e.reason];
      continue;
    }
    ++c.n_valid;
    if (e.s > 1.0) ++c.n_gain;
  }
  if (c.n_valid == 0)
    throw InsufficientData("cohort_fraction: empty cohort, no valid " + std::string(to_string(opt.kind)) +
                           " events after exclusions (" + std::to_string(c.n_events) + " events)");
  c.fraction_gain = static_cast<double>(c.n_gain) / static_cast<double>(c.n_valid);
  return c;
}

struct SourceRatio {
  TrafficSource source = TrafficSource::related;
  bool present = false;  // any included event had traffic data
  long n = 0;            // valid per-source ratios
  std::optional<double> median_ratio;  // absent below the minimum count
};

struct TrafficReport {
  KindFilter kind = KindFilter::all;
  long n_events = 0;     // valid cohort events with s > 1
  std::vector<SourceRatio> sources;  // related, promoted, search
};

inline double median(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

/// Per traffic source, the median of the window ratio computed on that
/// source's daily views over cohort events with s > 1. Medians from fewer than
/// `min_count` events are reported as not available.
inline TrafficReport traffic_ratios(const Dataset& ds, const CohortOptions& opt = {},
                                    long min_count = kDefaultMinTrafficEvents) {
  if (min_count < 1) throw InvalidInput("traffic_ratios: minimum count must be >= 1");
  TrafficReport rep;
  rep.kind = opt.kind;
  const auto events = cohort_events(ds, opt);
  std::map<TrafficSource, std::vector<double>> ratios;
  std::map<TrafficSource, bool> present;
  bool any_valid = false;
  for (const auto& e : events) {
    if (!e.valid) continue;
    any_valid = true;
    if (!(e.s > 1.0)) continue;
    ++rep.n_events;
    const VideoRecord* v = ds.find_video(e.event.video_id);
    if (!v) continue;
    for (auto src : {TrafficSource::related, TrafficSource::promoted, TrafficSource::search}) {
      const auto it = v->traffic.find(src);
      if (it == v->traffic.end()) continue;
      present[src] = true;
      const WindowRatio w = window_ratio(it->second, e.event.day, opt.disjoint);
      if (w.valid) ratios[src].push_back(w.ratio);
    }
  }
  if (!any_valid) throw InsufficientData("traffic_ratios: empty cohort, no valid events after exclusions");
  for (auto src : {TrafficSource::related, TrafficSource::promoted, TrafficSource::search}) {
    SourceRatio r;
    r.source = src;
    r.present = present[src];
    r.n = static_cast<long>(ratios[src].size());
    if (r.n >= min_count) r.median_ratio = median(ratios[src]);
    rep.sources.push_back(r);
  }
  return rep;
}

}  // namespace engagedyn::metaopt
