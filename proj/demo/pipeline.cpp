// Small tour of the library on synthetic data: fits the day-41 scenario,
// screens a causal and a null channel, and detects a weekly upload schedule.

#include <cstdio>

#include "engagedyn/gompertz.hpp"
#include "engagedyn/granger.hpp"
#include "engagedyn/presets.hpp"
#include "engagedyn/schedule.hpp"

using namespace engagedyn;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 7;
  synth::Rng root(seed);

  synth::Rng r0 = root.split(0);
  const TimeSeries views = presets::day41_series(r0);
  gompertz::FitConfig cfg;
  cfg.seed = seed;
  const gompertz::GompertzFit fit = gompertz::fit(views.values, cfg);
  std::printf("Gompertz fit: K = %d, SSE = %.1f\n", fit.k_max, fit.sse);
  for (std::size_t k = 0; k < fit.params.components.size(); ++k) {
    const auto& c = fit.params.components[k];
    std::printf("  component %zu: t = %5.1f  M = %8.1f  eta = %.3f  b = %.3f  c = %.3f\n", k, c.onset, c.M, c.eta, c.b,
                c.c);
  }
  const auto& d = fit.decomposition;
  const std::size_t last = d.total.size() - 1;
  std::printf("  day %zu: total %.0f = viral %.0f + migration %.0f + events %.0f\n", last, d.total[last], d.viral[last],
              d.migration[last], d.events.empty() ? 0.0 : d.events[0][last]);

  granger::CausalityOptions opt;
  for (int which = 0; which < 2; ++which) {
    synth::Rng rc = root.split(1 + static_cast<std::uint64_t>(which));
    const ChannelSeries ch = which == 0 ? presets::causal_channel(500, rc) : presets::null_channel(500, rc);
    opt.ar.intercept = which == 1;
    const granger::GrangerReport rep = granger::channel_causality(ch, opt);
    std::printf("%s channel: Ljung-Box p = %.3f, Wald W = %.2f p = %.3g, verdict: %s\n", which == 0 ? "causal" : "null",
                rep.ljung_box.p, rep.wald.W, rep.wald.p,
                !rep.causality ? "inadequate model" : (*rep.causality ? "views drive subscribers" : "no causality"));
  }

  synth::Rng rs = root.split(3);
  const ChannelSeries weekly = presets::weekly_channel(700, rs);
  const schedule::ScheduleReport s = schedule::analyze_channel(weekly);
  if (s.dominant_period) {
    std::printf("schedule: period %ld days (peak ratio %.1f), %zu off-schedule uploads", *s.dominant_period, s.peak_ratio,
                s.events.size());
    if (s.gains.fraction_views_gain) std::printf(", %.0f%% followed by a view gain", 100.0 * *s.gains.fraction_views_gain);
    std::printf("\n");
  } else {
    std::printf("schedule: no dominant period (peak ratio %.2f)\n", s.peak_ratio);
  }
  return 0;
}
