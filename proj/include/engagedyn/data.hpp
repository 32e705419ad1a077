#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "engagedyn/csv.hpp"
#include "engagedyn/error.hpp"
#include "engagedyn/format.hpp"
#include "engagedyn/numkit/linalg.hpp"

namespace engagedyn {

// ---------------------------------------------------------------------------
// Calendar dates

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  /// Days since 1970-01-01 (proleptic Gregorian).
  long serial() const {
    const int y = year - (month <= 2);
    const long era = (y >= 0 ? y : y - 399) / 400;
    const long yoe = y - era * 400;
    const long doy = (153 * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
    const long doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
  }

  static Date from_serial(long z) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const long doe = z - era * 146097;
    const long yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const long mp = (5 * doy + 2) / 153;
    Date d;
    d.day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    d.month = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
    d.year = static_cast<int>(yoe + era * 400 + (d.month <= 2));
    return d;
  }

  static std::optional<Date> parse(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    const auto y = parse_int(s.substr(0, 4));
    const auto m = parse_int(s.substr(5, 2));
    const auto d = parse_int(s.substr(8, 2));
    if (!y || !m || !d || *m < 1 || *m > 12 || *d < 1 || *d > 31) return std::nullopt;
    Date out{static_cast<int>(*y), static_cast<int>(*m), static_cast<int>(*d)};
    // Reject impossible days such as 2021-02-30.
    if (from_serial(out.serial()) != out) return std::nullopt;
    return out;
  }

  std::string str() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
  }

  Date plus_days(long n) const { return from_serial(serial() + n); }

  friend bool operator==(const Date&, const Date&) = default;
  friend auto operator<=>(const Date& a, const Date& b) { return a.serial() <=> b.serial(); }
};

// ---------------------------------------------------------------------------
// Series and records

enum class SeriesKind { daily, cumulative };

struct TimeSeries {
  Date start;
  std::vector<double> values;
  SeriesKind kind = SeriesKind::daily;
};

inline TimeSeries to_cumulative(const TimeSeries& s) {
  if (s.kind != SeriesKind::daily) throw InvalidInput("to_cumulative: series is already cumulative");
  TimeSeries out{s.start, s.values, SeriesKind::cumulative};
  std::partial_sum(out.values.begin(), out.values.end(), out.values.begin());
  return out;
}

inline TimeSeries to_daily(const TimeSeries& s) {
  if (s.kind != SeriesKind::cumulative) throw InvalidInput("to_daily: series is already daily");
  TimeSeries out{s.start, s.values, SeriesKind::daily};
  for (std::size_t i = 1; i < s.values.size(); ++i) {
    if (s.values[i] < s.values[i - 1])
      throw InvalidInput("to_daily: cumulative series decreases at day " + std::to_string(i));
    out.values[i] = s.values[i] - s.values[i - 1];
  }
  return out;
}

enum class OptKind { title, thumbnail, keyword };

inline std::string_view to_string(OptKind k) {
  switch (k) {
    case OptKind::title: return "title";
    case OptKind::thumbnail: return "thumbnail";
    case OptKind::keyword: return "keyword";
  }
  return "?";
}

inline std::optional<OptKind> parse_opt_kind(std::string_view s) {
  if (s == "title") return OptKind::title;
  if (s == "thumbnail") return OptKind::thumbnail;
  if (s == "keyword") return OptKind::keyword;
  return std::nullopt;
}

enum class TrafficSource { related, promoted, search, other };
inline constexpr std::array<TrafficSource, 4> kTrafficSources = {TrafficSource::related, TrafficSource::promoted,
                                                                 TrafficSource::search, TrafficSource::other};

inline std::string_view to_string(TrafficSource s) {
  switch (s) {
    case TrafficSource::related: return "related";
    case TrafficSource::promoted: return "promoted";
    case TrafficSource::search: return "search";
    case TrafficSource::other: return "other";
  }
  return "?";
}

inline std::optional<TrafficSource> parse_traffic_source(std::string_view s) {
  for (auto src : kTrafficSources)
    if (to_string(src) == s) return src;
  return std::nullopt;
}

struct MetaOptEvent {
  std::string video_id;
  long day = 0;
  OptKind kind = OptKind::title;
};

/// Named meta-level features in registry order.
struct FeatureVector {
  std::vector<std::string> names;
  std::vector<double> values;

  std::optional<double> get(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return values[i];
    return std::nullopt;
  }
};

struct VideoRecord {
  std::string video_id;
  std::string channel_id;
  Date upload_date;
  std::string category;
  std::vector<std::string> keywords;
  FeatureVector features;
  TimeSeries daily_views;
  std::vector<MetaOptEvent> events;
  /// Per-source daily views, same length as daily_views; absent when no traffic data.
  std::map<TrafficSource, std::vector<double>> traffic;
};

struct ChannelSeries {
  std::string channel_id;
  std::string category;
  std::vector<Date> dates;
  std::vector<double> subscribers;
  std::vector<double> views;
  std::vector<double> uploads;
  std::vector<double> comments;  // empty when not recorded

  std::size_t size() const { return dates.size(); }
  bool has_comments() const { return !comments.empty(); }
};

// ---------------------------------------------------------------------------
// Feature registry

/// Canonical meta-level feature names, in the order used for deterministic tie-breaks.
inline const std::vector<std::string>& canonical_features() {
  static const std::vector<std::string> names = {
      "first_day_views", "subscribers",       "thumb_contrast",   "google_hits",     "n_keywords",
      "category_code",   "title_length",      "title_uppercase",  "thumb_brightness", "thumb_blur_canny",
      "thumb_blur_laplace", "thumb_overexposure", "thumb_entropy", "thumb_resolution", "title_word_count",
      "title_punctuation", "title_sentiment",   "title_subjectivity", "keyword_length", "video_length",
  };
  return names;
}

/// Orders feature names: canonical names first in canonical order, then the rest
/// in their original order.
inline std::vector<std::string> registry_order(const std::vector<std::string>& names) {
  std::vector<std::string> out;
  for (const auto& c : canonical_features())
    if (std::find(names.begin(), names.end(), c) != names.end()) out.push_back(c);
  for (const auto& n : names)
    if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
  return out;
}

// ---------------------------------------------------------------------------
// Dataset ingestion

struct DatasetPaths {
  std::optional<std::string> videos, views, channels, events, traffic;
};

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<VideoRecord> videos;      // sorted by video_id
  std::vector<ChannelSeries> channels;  // sorted by channel_id
  std::map<std::string, std::size_t> row_counts;

  const VideoRecord* find_video(std::string_view id) const {
    auto it = std::lower_bound(videos.begin(), videos.end(), id,
                               [](const VideoRecord& v, std::string_view k) { return v.video_id < k; });
    return it != videos.end() && it->video_id == id ? &*it : nullptr;
  }
};

namespace detail {

inline const std::string& field(const csv::Table& /*t*/, const csv::Row& row, long col) {
  return row.fields[static_cast<std::size_t>(col)];
}

inline long require_column(const csv::Table& t, std::string_view name) {
  const long c = t.column(name);
  if (c < 0) throw SchemaError(t.path, 1, std::string(name), "required column missing");
  return c;
}

inline double real_field(const csv::Table& t, const csv::Row& row, long col, bool nonneg) {
  const auto v = parse_real(field(t, row, col));
  if (!v) throw SchemaError(t.path, row.line, t.header[col], "not a finite number: '" + field(t, row, col) + "'");
  if (nonneg && *v < 0) throw SchemaError(t.path, row.line, t.header[col], "must be >= 0");
  return *v;
}

inline long long int_field(const csv::Table& t, const csv::Row& row, long col) {
  const auto v = parse_int(field(t, row, col));
  if (!v) throw SchemaError(t.path, row.line, t.header[col], "not an integer: '" + field(t, row, col) + "'");
  if (*v < 0) throw SchemaError(t.path, row.line, t.header[col], "must be >= 0");
  return *v;
}

inline Date date_field(const csv::Table& t, const csv::Row& row, long col) {
  const auto d = Date::parse(field(t, row, col));
  if (!d) throw SchemaError(t.path, row.line, t.header[col], "not a YYYY-MM-DD date: '" + field(t, row, col) + "'");
  return *d;
}

inline std::string list_ids(const std::vector<std::string>& ids, std::size_t limit = 20) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < limit; ++i) out += (i ? ", " : "") + ids[i];
  if (ids.size() > limit) out += ", ... (" + std::to_string(ids.size()) + " total)";
  return out;
}

inline void reject_unknown_columns(const csv::Table& t, const std::vector<std::string>& allowed) {
  for (const auto& h : t.header)
    if (std::find(allowed.begin(), allowed.end(), h) == allowed.end())
      throw SchemaError(t.path, 1, h, "unexpected column");
}

inline std::vector<std::string> split_keywords(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ';') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace detail

/// Loads and validates any combination of the five CSV files. Views without a
/// videos file create bare video records; when both are present every video
/// must have a series and every series a video.
inline Dataset load_dataset(const DatasetPaths& paths) {
  using detail::field;
  Dataset ds;
  std::map<std::string, VideoRecord> videos;

  if (paths.videos) {
    const auto t = csv::read(*paths.videos);
    const long c_id = detail::require_column(t, "video_id");
    const long c_ch = detail::require_column(t, "channel_id");
    const long c_date = detail::require_column(t, "upload_date");
    const long c_cat = detail::require_column(t, "category");
    const long c_kw = t.column("keywords");
    std::vector<std::pair<std::string, long>> fcols;
    for (std::size_t i = 0; i < t.header.size(); ++i) {
      const auto& h = t.header[i];
      if (h.rfind("f_", 0) == 0) {
        if (h.size() == 2) throw SchemaError(t.path, 1, h, "empty feature name");
        fcols.emplace_back(h.substr(2), static_cast<long>(i));
      } else if (h != "video_id" && h != "channel_id" && h != "upload_date" && h != "category" && h != "keywords") {
        throw SchemaError(t.path, 1, h, "unexpected column (feature columns must be prefixed f_)");
      }
    }
    std::vector<std::string> raw_names;
    for (const auto& [n, c] : fcols) raw_names.push_back(n);
    ds.feature_names = registry_order(raw_names);
    std::vector<long> order;
    for (const auto& n : ds.feature_names)
      for (const auto& [fn, c] : fcols)
        if (fn == n) order.push_back(c);

    for (const auto& row : t.rows) {
      VideoRecord v;
      v.video_id = field(t, row, c_id);
      if (v.video_id.empty()) throw SchemaError(t.path, row.line, "video_id", "empty id");
      v.channel_id = field(t, row, c_ch);
      v.upload_date = detail::date_field(t, row, c_date);
      v.category = field(t, row, c_cat);
      if (c_kw >= 0) v.keywords = detail::split_keywords(field(t, row, c_kw));
      v.features.names = ds.feature_names;
      for (long c : order) v.features.values.push_back(detail::real_field(t, row, c, false));
      v.daily_views.start = v.upload_date;
      if (videos.count(v.video_id))
        throw SchemaError(t.path, row.line, "video_id", "duplicate key '" + v.video_id + "'");
      videos.emplace(v.video_id, std::move(v));
    }
    ds.row_counts["videos"] = t.rows.size();
  }

  if (paths.views) {
    const auto t = csv::read(*paths.views);
    detail::reject_unknown_columns(t, {"video_id", "day_index", "views"});
    const long c_id = detail::require_column(t, "video_id");
    const long c_day = detail::require_column(t, "day_index");
    const long c_v = detail::require_column(t, "views");
    std::map<std::string, std::map<long long, double>> series;
    std::map<std::string, std::size_t> first_line;
    for (const auto& row : t.rows) {
      const auto& id = field(t, row, c_id);
      const auto day = detail::int_field(t, row, c_day);
      const double v = static_cast<double>(detail::int_field(t, row, c_v));
      auto& s = series[id];
      if (!s.emplace(day, v).second)
        throw SchemaError(t.path, row.line, "day_index",
                          "duplicate key (" + id + ", " + std::to_string(day) + ")");
      first_line.try_emplace(id, row.line);
    }
    std::vector<std::string> orphans;
    for (auto& [id, s] : series) {
      if (paths.videos && !videos.count(id)) {
        orphans.push_back(id);
        continue;
      }
      long long expect = 0;
      for (const auto& [day, v] : s) {
        if (day != expect)
          throw InvalidInput(t.path + ": video '" + id + "' has a gap at day_index " + std::to_string(expect));
        ++expect;
      }
      auto& rec = videos[id];
      rec.video_id = id;
      rec.daily_views.kind = SeriesKind::daily;
      rec.daily_views.values.clear();
      for (const auto& [day, v] : s) rec.daily_views.values.push_back(v);
    }
    if (!orphans.empty())
      throw InvalidInput(t.path + ": view rows reference unknown videos: " + detail::list_ids(orphans));
    if (paths.videos) {
      std::vector<std::string> missing;
      for (const auto& [id, v] : videos)
        if (!series.count(id)) missing.push_back(id);
      if (!missing.empty())
        throw InvalidInput(t.path + ": videos lacking a view series: " + detail::list_ids(missing));
    }
    ds.row_counts["views"] = t.rows.size();
  }

  if (paths.events) {
    const auto t = csv::read(*paths.events);
    detail::reject_unknown_columns(t, {"video_id", "day_index", "kind"});
    const long c_id = detail::require_column(t, "video_id");
    const long c_day = detail::require_column(t, "day_index");
    const long c_kind = detail::require_column(t, "kind");
    std::vector<std::string> orphans;
    for (const auto& row : t.rows) {
      const auto& id = field(t, row, c_id);
      const auto day = detail::int_field(t, row, c_day);
      const auto kind = parse_opt_kind(field(t, row, c_kind));
      if (!kind) throw SchemaError(t.path, row.line, "kind", "expected title|thumbnail|keyword");
      auto it = videos.find(id);
      if (it == videos.end()) {
        orphans.push_back(id);
        continue;
      }
      const auto n = it->second.daily_views.values.size();
      if (paths.views && static_cast<std::size_t>(day) >= n)
        throw SchemaError(t.path, row.line, "day_index", "outside the observed range of video '" + id + "'");
      it->second.events.push_back({id, static_cast<long>(day), *kind});
    }
    if (!orphans.empty())
      throw InvalidInput(t.path + ": events reference unknown videos: " + detail::list_ids(orphans));
    for (auto& [id, v] : videos)
      std::stable_sort(v.events.begin(), v.events.end(),
                       [](const MetaOptEvent& a, const MetaOptEvent& b) { return a.day < b.day; });
    ds.row_counts["events"] = t.rows.size();
  }

  if (paths.traffic) {
    const auto t = csv::read(*paths.traffic);
    detail::reject_unknown_columns(t, {"video_id", "day_index", "source", "views"});
    const long c_id = detail::require_column(t, "video_id");
    const long c_day = detail::require_column(t, "day_index");
    const long c_src = detail::require_column(t, "source");
    const long c_v = detail::require_column(t, "views");
    std::vector<std::string> orphans;
    std::set<std::tuple<std::string, long long, int>> seen;
    for (const auto& row : t.rows) {
      const auto& id = field(t, row, c_id);
      const auto day = detail::int_field(t, row, c_day);
      const auto src = parse_traffic_source(field(t, row, c_src));
      if (!src) throw SchemaError(t.path, row.line, "source", "expected related|promoted|search|other");
      const double v = static_cast<double>(detail::int_field(t, row, c_v));
      auto it = videos.find(id);
      if (it == videos.end()) {
        orphans.push_back(id);
        continue;
      }
      if (!seen.emplace(id, day, static_cast<int>(*src)).second)
        throw SchemaError(t.path, row.line, "source", "duplicate key for video '" + id + "'");
      auto& rec = it->second;
      const std::size_t n = std::max<std::size_t>(rec.daily_views.values.size(), static_cast<std::size_t>(day) + 1);
      if (paths.views && static_cast<std::size_t>(day) >= rec.daily_views.values.size())
        throw SchemaError(t.path, row.line, "day_index", "outside the observed range of video '" + id + "'");
      // Days absent from traffic.csv count as zero views for that source.
      for (auto s : kTrafficSources) {
        auto& vec = rec.traffic[s];
        if (vec.size() < n) vec.resize(n, 0.0);
      }
      rec.traffic[*src][static_cast<std::size_t>(day)] = v;
    }
    if (!orphans.empty())
      throw InvalidInput(t.path + ": traffic rows reference unknown videos: " + detail::list_ids(orphans));
    ds.row_counts["traffic"] = t.rows.size();
  }

  if (paths.channels) {
    const auto t = csv::read(*paths.channels);
    detail::reject_unknown_columns(t, {"channel_id", "date", "subscribers", "views", "uploads", "comments"});
    const long c_id = detail::require_column(t, "channel_id");
    const long c_date = detail::require_column(t, "date");
    const long c_sub = detail::require_column(t, "subscribers");
    const long c_v = detail::require_column(t, "views");
    const long c_up = detail::require_column(t, "uploads");
    const long c_com = t.column("comments");
    struct Day {
      Date date;
      double sub, views, uploads;
      std::optional<double> comments;
      std::size_t line;
    };
    std::map<std::string, std::vector<Day>> rows;
    for (const auto& row : t.rows) {
      Day d{detail::date_field(t, row, c_date), detail::real_field(t, row, c_sub, true),
            detail::real_field(t, row, c_v, true), detail::real_field(t, row, c_up, true), std::nullopt, row.line};
      if (c_com >= 0 && !field(t, row, c_com).empty()) d.comments = detail::real_field(t, row, c_com, true);
      rows[field(t, row, c_id)].push_back(d);
    }
    // Channel category: majority category of its videos, ties to the smallest name.
    std::map<std::string, std::map<std::string, int>> votes;
    for (const auto& [id, v] : videos)
      if (!v.channel_id.empty()) ++votes[v.channel_id][v.category];
    for (auto& [id, days] : rows) {
      std::sort(days.begin(), days.end(), [](const Day& a, const Day& b) { return a.date < b.date; });
      ChannelSeries ch;
      ch.channel_id = id;
      ch.category = "unknown";
      if (auto it = votes.find(id); it != votes.end()) {
        int best = -1;
        for (const auto& [cat, n] : it->second)
          if (n > best) {
            best = n;
            ch.category = cat;
          }
      }
      const bool with_comments = days.front().comments.has_value();
      for (std::size_t i = 0; i < days.size(); ++i) {
        const auto& d = days[i];
        if (i > 0 && d.date.serial() != days[i - 1].date.serial() + 1)
          throw SchemaError(t.path, d.line, "date",
                            d.date == days[i - 1].date ? "duplicate date for channel '" + id + "'"
                                                       : "gap before this date for channel '" + id + "'");
        if (d.comments.has_value() != with_comments)
          throw SchemaError(t.path, d.line, "comments", "comments must be present on all or none of a channel's rows");
        ch.dates.push_back(d.date);
        ch.subscribers.push_back(d.sub);
        ch.views.push_back(d.views);
        ch.uploads.push_back(d.uploads);
        if (with_comments) ch.comments.push_back(*d.comments);
      }
      ds.channels.push_back(std::move(ch));
    }
    ds.row_counts["channels"] = t.rows.size();
  }

  for (auto& [id, v] : videos) {
    if (v.daily_views.values.size() > 0)
      for (auto& [src, vec] : v.traffic) vec.resize(v.daily_views.values.size(), 0.0);
    ds.videos.push_back(std::move(v));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Regression table and pre-processing

/// log10(views + 1): 10^6 views maps to ~6, zero views to 0.
inline double log_views(double raw_views) { return std::log10(raw_views + 1.0); }

struct FeatureTable {
  std::vector<std::string> names;
  std::vector<std::string> ids;
  Matrix X;  // rows = videos, cols = features
  Vector y;  // log-scale target
};

/// Feature matrix plus log10 cumulative views over the first `horizon_days`
/// days. Videos observed for fewer days are skipped and listed in `skipped`.
inline FeatureTable feature_table(const Dataset& ds, int horizon_days = 14,
                                  std::vector<std::string>* skipped = nullptr) {
  FeatureTable t;
  t.names = ds.feature_names;
  std::vector<const VideoRecord*> use;
  for (const auto& v : ds.videos) {
    if (static_cast<int>(v.daily_views.values.size()) < horizon_days) {
      if (skipped) skipped->push_back(v.video_id);
      continue;
    }
    use.push_back(&v);
  }
  t.X.resize(static_cast<Eigen::Index>(use.size()), static_cast<Eigen::Index>(t.names.size()));
  t.y.resize(static_cast<Eigen::Index>(use.size()));
  for (std::size_t i = 0; i < use.size(); ++i) {
    t.ids.push_back(use[i]->video_id);
    for (std::size_t j = 0; j < t.names.size(); ++j) t.X(i, j) = use[i]->features.values[j];
    double total = 0.0;
    for (int d = 0; d < horizon_days; ++d) total += use[i]->daily_views.values[d];
    t.y(i) = log_views(total);
  }
  return t;
}

inline FeatureTable select_columns(const FeatureTable& t, const std::vector<std::string>& keep) {
  FeatureTable out;
  out.ids = t.ids;
  out.y = t.y;
  out.X.resize(t.X.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto it = std::find(t.names.begin(), t.names.end(), keep[k]);
    if (it == t.names.end()) throw InvalidInput("unknown feature '" + keep[k] + "'");
    out.X.col(k) = t.X.col(it - t.names.begin());
    out.names.push_back(keep[k]);
  }
  return out;
}

inline FeatureTable select_rows(const FeatureTable& t, const std::vector<long>& rows) {
  FeatureTable out;
  out.names = t.names;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), t.X.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.X.row(i) = t.X.row(rows[i]);
    out.y(i) = t.y(rows[i]);
    if (!t.ids.empty()) out.ids.push_back(t.ids[rows[i]]);
  }
  return out;
}

/// Per-feature min-max scaler onto [0, 1]. No whitening.
struct MinMaxScaler {
  std::vector<std::string> names;
  std::vector<double> min;
  std::vector<double> max;

  bool is_constant(std::size_t j) const { return !(max[j] > min[j]); }

  double scale(std::size_t j, double v, long* clipped = nullptr) const {
    if (is_constant(j)) return 0.5;
    const double s = (v - min[j]) / (max[j] - min[j]);
    if (s < 0.0 || s > 1.0) {
      if (clipped) ++*clipped;
      return std::clamp(s, 0.0, 1.0);
    }
    return s;
  }

  Matrix transform(const Matrix& X, long* clipped = nullptr) const {
    if (X.cols() != static_cast<Eigen::Index>(names.size())) throw InvalidInput("scaler: column count mismatch");
    Matrix out(X.rows(), X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      for (Eigen::Index j = 0; j < X.cols(); ++j) out(i, j) = scale(static_cast<std::size_t>(j), X(i, j), clipped);
    return out;
  }
};

struct ScaleResult {
  FeatureTable scaled;
  MinMaxScaler scaler;
  long clipped = 0;  // held-out values pushed back into [0, 1]
  std::vector<std::string> warnings;
};

/// Learns min/max on `fit_rows` only and applies them to every row. Constant
/// features are kept and mapped to 0.5.
inline ScaleResult scale_features(const FeatureTable& t, const std::vector<long>& fit_rows) {
  if (fit_rows.empty()) throw InvalidInput("scale_features: empty fit subset");
  ScaleResult r;
  r.scaler.names = t.names;
  for (Eigen::Index j = 0; j < t.X.cols(); ++j) {
    double lo = t.X(fit_rows[0], j), hi = lo;
    for (long i : fit_rows) {
      if (i < 0 || i >= t.X.rows()) throw InvalidInput("scale_features: fit row out of range");
      lo = std::min(lo, t.X(i, j));
      hi = std::max(hi, t.X(i, j));
    }
    r.scaler.min.push_back(lo);
    r.scaler.max.push_back(hi);
    if (!(hi > lo)) r.warnings.push_back("feature '" + t.names[j] + "' is constant on the fit subset; scaled to 0.5");
  }
  r.scaled = t;
  r.scaled.X = r.scaler.transform(t.X, &r.clipped);
  return r;
}

inline ScaleResult scale_features(const FeatureTable& t) {
  std::vector<long> all(static_cast<std::size_t>(t.X.rows()));
  std::iota(all.begin(), all.end(), 0L);
  return scale_features(t, all);
}

inline double pearson(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  const Vector ca = a.array() - a.mean();
  const Vector cb = b.array() - b.mean();
  const double den = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  return den > 0.0 ? ca.dot(cb) / den : 0.0;
}

struct DroppedFeature {
  std::string name;
  std::string partner;  // empty for zero-variance drops
  double abs_rho = 0.0;
};

struct PearsonResult {
  std::vector<std::string> kept;
  std::vector<DroppedFeature> dropped;
  std::vector<std::string> warnings;
};

/// Greedy correlation-based elimination. Zero-variance features go first.
/// Then, while some kept pair has |rho| > threshold, the worst pair loses the
/// member with the larger mean |rho| to the other kept features; ties drop the
/// later one in registry order.
inline PearsonResult pearson_eliminate(const FeatureTable& t, double threshold = 0.9) {
  if (t.X.rows() < 2) throw InvalidInput("pearson_eliminate: need at least 2 samples");
  if (!(threshold > 0.0 && threshold <= 1.0)) throw InvalidInput("pearson_eliminate: threshold must be in (0, 1]");
  const auto m = static_cast<std::size_t>(t.X.cols());
  PearsonResult r;
  std::vector<bool> alive(m, true);
  for (std::size_t j = 0; j < m; ++j) {
    const double mean = t.X.col(j).mean();
    if ((t.X.col(j).array() - mean).square().sum() == 0.0) {
      alive[j] = false;
      r.dropped.push_back({t.names[j], "", 0.0});
      r.warnings.push_back("feature '" + t.names[j] + "' has zero variance; dropped");
    }
  }
  Matrix rho = Matrix::Zero(m, m);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b)
      if (alive[a] && alive[b]) rho(a, b) = rho(b, a) = std::abs(pearson(t.X.col(a), t.X.col(b)));

  for (;;) {
    double worst = threshold;
    std::size_t wa = m, wb = m;
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b)
        if (alive[a] && alive[b] && rho(a, b) > worst) {
          worst = rho(a, b);
          wa = a;
          wb = b;
        }
    if (wa == m) break;
    auto mean_rho = [&](std::size_t j) {
      double s = 0.0;
      int n = 0;
      for (std::size_t k = 0; k < m; ++k)
        if (k != j && alive[k]) {
          s += rho(j, k);
          ++n;
        }
      return n ? s / n : 0.0;
    };
    const std::size_t drop = mean_rho(wa) > mean_rho(wb) ? wa : wb;
    const std::size_t keep = drop == wa ? wb : wa;
    alive[drop] = false;
    r.dropped.push_back({t.names[drop], t.names[keep], worst});
  }
  for (std::size_t j = 0; j < m; ++j)
    if (alive[j]) r.kept.push_back(t.names[j]);
  return r;
}

}  // namespace engagedyn
