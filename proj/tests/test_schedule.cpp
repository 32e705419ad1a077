#include <gtest/gtest.h>

#include "engagedyn/presets.hpp"
#include "engagedyn/schedule.hpp"

using namespace engagedyn;

namespace {

std::vector<double> uploads_on(long T, std::initializer_list<long> days) {
  std::vector<double> u(static_cast<std::size_t>(T), 0.0);
  for (long d : days) u[static_cast<std::size_t>(d)] = 1.0;
  return u;
}

}  // namespace

TEST(Periodicity, StrictWeeklySchedule) {
  std::vector<double> u(364, 0.0);
  for (std::size_t d = 3; d < u.size(); d += 7) u[d] = 1.0;
  const auto p = schedule::periodicity(u);
  EXPECT_TRUE(p.dominant);
  EXPECT_EQ(p.period, 7);
  EXPECT_NEAR(p.frequency, 1.0 / 7.0, 1e-12);
  EXPECT_GT(p.peak_ratio, 2.0);
  EXPECT_EQ(schedule::dominant_schedule(u)->period, 7);
}

TEST(Periodicity, OtherPeriods) {
  for (long period : {3L, 5L, 14L}) {
    std::vector<double> u(420, 0.0);
    for (long d = 0; d < 420; d += period) u[static_cast<std::size_t>(d)] = 1.0;
    const auto s = schedule::dominant_schedule(u);
    ASSERT_TRUE(s) << period;
    EXPECT_EQ(s->period, period);
  }
}

TEST(Periodicity, SyntheticWeeklyVersusRandom) {
  int weekly = 0, random = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    synth::Rng rng(seed);
    const ChannelSeries ch = presets::weekly_channel(364, rng);
    const auto s = schedule::dominant_schedule(ch.uploads);
    weekly += s && s->period == 7;
    synth::Rng r2(1000 + seed);
    random += schedule::dominant_schedule(presets::random_uploads(364, 1.0 / 7.0, r2)).has_value();
  }
  EXPECT_GE(weekly, 9);
  EXPECT_LE(random, 2);
}

TEST(Periodicity, InputChecks) {
  EXPECT_THROW(schedule::periodicity(std::vector<double>(27, 1.0)), InsufficientData);
  EXPECT_THROW(schedule::periodicity(uploads_on(60, {1, 2, 3})), InsufficientData);
  auto bad = uploads_on(60, {1, 8, 15, 22});
  bad[5] = -1.0;
  EXPECT_THROW(schedule::periodicity(bad), InvalidInput);
}

TEST(OffSchedule, FarAndDuplicateUploads) {
  // Anchor phase 0. Day 10 is 3 days off; day 15 shares day 14's window and is farther from it.
  const auto u = uploads_on(40, {0, 7, 10, 14, 15, 21, 28, 35});
  EXPECT_EQ(schedule::off_schedule_events(u, 7, 1), (std::vector<long>{10, 15}));
  // A wider tolerance does not help day 10: day 7 already holds that window.
  EXPECT_EQ(schedule::off_schedule_events(u, 7, 3), (std::vector<long>{10, 15}));
  // With day 7 missing, day 10 is the only upload near anchor 7.
  const auto gap = uploads_on(40, {0, 10, 14, 15, 21, 28, 35});
  EXPECT_EQ(schedule::off_schedule_events(gap, 7, 1), (std::vector<long>{10, 15}));
  EXPECT_EQ(schedule::off_schedule_events(gap, 7, 3), (std::vector<long>{15}));
}

TEST(OffSchedule, JitterWithinToleranceIsOnSchedule) {
  const auto u = uploads_on(40, {0, 8, 14, 20, 28, 35});
  EXPECT_TRUE(schedule::off_schedule_events(u, 7, 1).empty());
  EXPECT_EQ(schedule::off_schedule_events(u, 7, 0), (std::vector<long>{8, 20}));
}

TEST(OffSchedule, CloserUploadReplacesEarlierOne) {
  const auto u = uploads_on(40, {0, 7, 13, 14, 21});
  EXPECT_EQ(schedule::off_schedule_events(u, 7, 1), (std::vector<long>{13}));
  EXPECT_THROW(schedule::off_schedule_events(u, 1, 1), InvalidInput);
  EXPECT_THROW(schedule::off_schedule_events(u, 7, -1), InvalidInput);
  EXPECT_TRUE(schedule::off_schedule_events(std::vector<double>(10, 0.0), 7).empty());
}

TEST(OffSchedule, SyntheticTruthRecovered) {
  long hit = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    synth::Rng rng(seed);
    synth::ScheduleSample truth;
    const ChannelSeries ch = presets::weekly_channel(364, rng, "c", &truth);
    const auto found = schedule::off_schedule_events(ch.uploads, 7, 1);
    for (long d : truth.off_schedule_days) {
      ++total;
      hit += std::count(found.begin(), found.end(), d) > 0;
    }
  }
  // Extra uploads landing within a day of a scheduled slot are indistinguishable.
  EXPECT_GE(hit, total * 6 / 10);
}

TEST(Gain, HandComputedRatios) {
  ChannelSeries ch;
  for (int t = 0; t < 40; ++t) {
    ch.views.push_back(t < 20 ? 10.0 : 20.0);
    ch.comments.push_back(t < 20 ? 0.0 : 4.0);
    ch.uploads.push_back(0.0);
  }
  ch.comments[15] = 7.0;  // pre-window [13, 19] comment mean 1
  const auto g = schedule::off_schedule_gain(ch, {20, 3, 36}, 7);
  EXPECT_EQ(g.n_events, 3);
  EXPECT_EQ(g.views_days, (std::vector<long>{20}));
  EXPECT_DOUBLE_EQ(g.views_gain[0], 2.0);
  EXPECT_DOUBLE_EQ(g.comments_gain[0], 4.0);
  EXPECT_DOUBLE_EQ(*g.fraction_views_gain, 1.0);
  ASSERT_EQ(g.skipped.size(), 2u);
  EXPECT_EQ(g.skipped[0].reason, "window-truncated");
  EXPECT_EQ(g.skipped[1].day, 36);
}

TEST(Gain, ZeroPreWindows) {
  ChannelSeries ch;
  ch.views.assign(30, 0.0);
  ch.comments.assign(30, 0.0);
  ch.views[5] = 3.0;
  for (int t = 10; t < 30; ++t) ch.views[t] = 1.0;
  const auto g = schedule::off_schedule_gain(ch, {8, 20}, 7);
  // Day 8: views pre-mean > 0 (day 5), comments zero. Day 20: views 1 -> 1, no gain.
  EXPECT_EQ(g.views_days, (std::vector<long>{8, 20}));
  EXPECT_DOUBLE_EQ(g.views_gain[1], 1.0);
  EXPECT_DOUBLE_EQ(*g.fraction_views_gain, 0.5);
  EXPECT_FALSE(g.fraction_comments_gain);
  ASSERT_EQ(g.skipped.size(), 2u);
  EXPECT_EQ(g.skipped[0].reason, "zero-pre-comments");

  ChannelSeries nv;
  nv.views.assign(30, 0.0);
  const auto z = schedule::off_schedule_gain(nv, {10}, 7);
  ASSERT_EQ(z.skipped.size(), 1u);
  EXPECT_EQ(z.skipped[0].reason, "zero-pre-views");
  EXPECT_THROW(schedule::off_schedule_gain(nv, {10}, 0), InvalidInput);
}

TEST(Analyze, WeeklyChannelEndToEnd) {
  synth::Rng rng(3);
  const ChannelSeries ch = presets::weekly_channel(700, rng);
  const auto r = schedule::analyze_channel(ch);
  ASSERT_TRUE(r.dominant_period);
  EXPECT_EQ(*r.dominant_period, 7);
  EXPECT_EQ(r.gains.n_events, static_cast<long>(r.events.size()));
  EXPECT_NEAR(schedule::upload_rate(ch), 1.0 / 7.0 + 0.03, 0.03);
}
