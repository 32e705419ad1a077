#pragma once

// Synthetic scenarios shared by the CLI `synth` presets, the demos and the
// acceptance suite.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "engagedyn/gompertz_model.hpp"
#include "engagedyn/synth.hpp"

namespace engagedyn::presets {

// ---------------------------------------------------------------------------
// Gompertz scenarios

inline constexpr int kDay41Horizon = 120;
inline constexpr double kDay41Noise = 0.01;  // relative

/// Upload burst (M0 = 2910, c0 = 13) plus one exogenous event at day 41
/// (M1 = 7174, c1 = 2).
inline gompertz::Params day41_params() {
  return gompertz::Params{{{0.0, 2910.0, 1.0, 0.5, 13.0}, {41.0, 7174.0, 1.0, 1.0, 2.0}}};
}

inline TimeSeries day41_series(synth::Rng& rng) {
  return synth::gen_gompertz(day41_params(), kDay41Horizon, {0.0, kDay41Noise}, rng);
}

struct TwoEventCase {
  gompertz::Params params;
  int horizon = 130;
  TimeSeries cumulative;
};

/// Two events with random onsets (t1 in 25..50, t2 25..45 days later),
/// sizes and migration slopes on top of the day-41 upload component.
inline TwoEventCase two_event_case(synth::Rng& rng) {
  TwoEventCase c;
  const long t1 = 25 + static_cast<long>(rng.below(26));
  const long t2 = t1 + 25 + static_cast<long>(rng.below(21));
  const double M1 = rng.uniform(3000, 8000), b1 = rng.uniform(0.4, 1.0), c1 = rng.uniform(0, 3);
  const double M2 = rng.uniform(3000, 8000), b2 = rng.uniform(0.4, 1.0), c2 = rng.uniform(0, 3);
  c.params = gompertz::Params{{{0.0, 2910.0, 1.0, 0.5, 13.0},
                               {static_cast<double>(t1), M1, 1.0, b1, c1},
                               {static_cast<double>(t2), M2, 1.0, b2, c2}}};
  c.cumulative = synth::gen_gompertz(c.params, c.horizon, {0.0, kDay41Noise}, rng);
  return c;
}

/// Adds decoy days (at least 10 days from every existing entry) until the
/// list holds `total` candidates.
inline std::vector<long> add_decoys(std::vector<long> days, std::size_t total, long horizon, synth::Rng& rng) {
  for (int guard = 0; days.size() < total && guard < 1000; ++guard) {
    const long d = 10 + static_cast<long>(rng.below(static_cast<std::size_t>(horizon - 20)));
    bool far = true;
    for (long x : days) far = far && std::abs(x - d) >= 10;
    if (far) days.push_back(d);
  }
  return days;
}

/// Playlist of `n` single-burst videos whose size and migration slope shrink
/// geometrically along the list.
inline std::vector<gompertz::Params> playlist_params(int n) {
  std::vector<gompertz::Params> out;
  for (int i = 0; i < n; ++i) {
    const double f = std::pow(0.7, i);
    out.push_back(gompertz::Params{{{0.0, 20000.0 * f, 1.0, 0.4, 40.0 * f}}});
  }
  return out;
}

/// Cumulative series to integer daily counts (the views.csv convention).
inline std::vector<long long> daily_counts(const std::vector<double>& cumulative) {
  std::vector<long long> out;
  long long prev = 0;
  for (double v : cumulative) {
    const long long c = std::max(prev, std::llround(v));
    out.push_back(c - prev);
    prev = c;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Channel scenarios

inline synth::ViewProcess white_views() {
  synth::ViewProcess vp;
  vp.kind = synth::ViewKind::white;
  vp.mean = 100.0;
  vp.sd = 10.0;
  return vp;
}

/// s(t) = 0.5 s(t-1) + 0.5 v(t-1) + e(t).
inline ChannelSeries causal_channel(int T, synth::Rng& rng, const std::string& id = "c1") {
  return synth::gen_granger_channel({0.5}, {0.5}, white_views(), T, 1.0, rng, id);
}

/// s(t) = 50 + 0.5 s(t-1) + e(t): no view dependence, mean level 100 so the
/// counts stay positive. Fit it with an intercept.
inline ChannelSeries null_channel(int T, synth::Rng& rng, const std::string& id = "c1") {
  return synth::gen_granger_channel({0.5}, {}, white_views(), T, 1.0, rng, id, {2020, 1, 1}, 50.0);
}

/// Weekly uploads (jitter 0.2, 3% extra uploads); every upload lifts views
/// and comments with a decaying bump.
inline ChannelSeries weekly_channel(int T, synth::Rng& rng, const std::string& id = "c1",
                                    synth::ScheduleSample* truth = nullptr) {
  const synth::ScheduleSample s = synth::gen_schedule(7, 0.2, 0.03, T, rng);
  if (truth) *truth = s;
  ChannelSeries ch;
  ch.channel_id = id;
  Date d{2020, 1, 1};
  double subs = 5000.0, bump = 0.0;
  for (int t = 0; t < T; ++t) {
    bump = 0.7 * bump + (s.uploads[static_cast<std::size_t>(t)] > 0.0 ? 400.0 : 0.0);
    const double views = std::max(0.0, std::round(1000.0 + bump + 50.0 * rng.normal()));
    const double comments = std::max(0.0, std::round(0.01 * views + 2.0 * rng.normal()));
    subs += std::round(0.002 * views);
    ch.dates.push_back(d);
    ch.subscribers.push_back(subs);
    ch.views.push_back(views);
    ch.uploads.push_back(s.uploads[static_cast<std::size_t>(t)]);
    ch.comments.push_back(comments);
    d = d.plus_days(1);
  }
  return ch;
}

/// Uploads on random days with the given daily probability.
inline std::vector<double> random_uploads(int T, double p, synth::Rng& rng) {
  std::vector<double> u(static_cast<std::size_t>(T));
  for (auto& x : u) x = rng.bernoulli(p) ? 1.0 : 0.0;
  return u;
}

// ---------------------------------------------------------------------------
// Feature regression

inline const std::vector<int>& relevant_features() {
  static const std::vector<int> r{0, 1, 2};
  return r;
}

/// Additive-sigmoid target over features x01..x03 of 20 uniform features.
inline FeatureTable feature_set(int n, synth::Rng& rng, int m = 20, double noise = 0.05) {
  return synth::gen_feature_dataset(n, m, relevant_features(), {synth::Link::additive_sigmoid, 5.0}, noise, rng);
}

}  // namespace engagedyn::presets
