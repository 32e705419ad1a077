// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "engagedyn/elm.hpp"
#include "engagedyn/gompertz.hpp"
#include "engagedyn/granger.hpp"
#include "engagedyn/hsic.hpp"
#include "engagedyn/metaopt.hpp"
#include "engagedyn/numkit.hpp"
#include "engagedyn/presets.hpp"
#include "engagedyn/schedule.hpp"
#include "support.hpp"

using namespace engagedyn;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool rel_close(double a, double truth, double tol) { return std::abs(a / truth - 1.0) <= tol; }

Outcome gompertz_day41() {
  int ok = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    synth::Rng rng(seed);
    const TimeSeries ts = presets::day41_series(rng);
    gompertz::FitConfig cfg;
    cfg.seed = seed;
    const auto t0 = Clock::now();
    const auto f = gompertz::fit(ts.values, cfg);
    worst = std::max(worst, seconds_since(t0));
    const auto truth = presets::day41_params().components;
    ok += f.k_max == 1 && std::abs(f.params.components[1].onset - 41.0) <= 1.0 &&
          rel_close(f.params.components[0].M, truth[0].M, 0.05) && rel_close(f.params.components[1].M, truth[1].M, 0.05);
  }
  return {ok >= 18 && worst < 10.0, fmt("%d/20 recovered (need 18), slowest fit %.2fs (limit 10s)", ok, worst)};
}

Outcome oracle_equivalence() {
  int match = 0;
  double oracle_time = 0.0;
  std::size_t most = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    synth::Rng rng(seed);
    const auto c = presets::two_event_case(rng);
    gompertz::FitConfig cfg;
    cfg.seed = seed;
    const auto f = gompertz::fit(c.cumulative.values, cfg);
    const auto cands = presets::add_decoys(f.candidates, 4, c.horizon, rng);
    most = std::max(most, cands.size());
    const auto t0 = Clock::now();
    const auto o = gompertz::minlp_oracle(c.cumulative.values, cands, cfg);
    oracle_time += seconds_since(t0);
    match += o.selected == f.candidates;
  }
  return {match >= 45 && oracle_time <= 120.0 && most <= 4,
          fmt("%d/50 identical selections (need 45), oracle %.1fs total (limit 120s), max %zu candidates", match,
              oracle_time, most)};
}

Outcome granger_size_power() {
  const auto t0 = Clock::now();
  int null_rej = 0, power = 0;
  for (int s = 0; s < 1000; ++s) {
    synth::Rng r(1000 + s);
    const auto ch = synth::gen_granger_channel({0.5}, {}, presets::white_views(), 500, 1.0, r);
    null_rej += granger::wald_test(granger::fit_ar(ch, {})).p < 0.05;
  }
  for (int s = 0; s < 500; ++s) {
    synth::Rng r(5000 + s);
    power += granger::wald_test(granger::fit_ar(presets::causal_channel(500, r), {})).p < 0.05;
  }
  const double size = null_rej / 1000.0, pw = power / 500.0, dt = seconds_since(t0);
  return {size >= 0.03 && size <= 0.07 && pw >= 0.90 && dt < 120.0,
          fmt("null rejection %.3f (band 0.03..0.07), power %.3f (need 0.90), %.1fs", size, pw, dt)};
}

Outcome ljung_box_size() {
  int rej = 0;
  for (int s = 0; s < 1000; ++s) {
    synth::Rng r(9000 + s);
    Vector e(500);
    for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = r.normal();
    rej += granger::ljung_box(e, 10, 0).p < 0.05;
  }
  const double rate = rej / 1000.0;
  return {rate >= 0.03 && rate <= 0.07, fmt("rejection %.3f on iid noise (band 0.03..0.07)", rate)};
}

// Central differences of the trained network, h = 1e-5.
double ssd_fd_error(const elm::ElmModel& m, const Matrix& X, const std::vector<double>& ssd) {
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < X.cols(); ++k) {
    Matrix up = X, dn = X;
    up.col(k).array() += h;
    dn.col(k).array() -= h;
    const Vector g = (m.predict_scaled(up) - m.predict_scaled(dn)) / (2.0 * h);
    const double fd = g.squaredNorm();
    worst = std::max(worst, std::abs(ssd[static_cast<std::size_t>(k)] - fd) / std::max(fd, 1e-300));
  }
  return worst;
}

Outcome elm_regression() {
  double min_r2 = 1.0, worst_fd = 0.0, slowest = 0.0;
  int top3 = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    synth::Rng rng(seed);
    const FeatureTable t = presets::feature_set(2000, rng);
    elm::TrainOptions opt;
    synth::Rng cv(seed + 100);
    const auto ev = elm::kfold_eval(t.X, t.y, 10, opt, cv);
    min_r2 = std::min(min_r2, ev.r2_pooled);

    synth::Rng r3(seed + 200);
    const long n_fold = t.X.rows() * 9 / 10;
    const auto t0 = Clock::now();
    elm::train(t.X.topRows(n_fold), t.y.head(n_fold), opt, r3);
    slowest = std::max(slowest, seconds_since(t0));

    synth::Rng r4(seed + 300);
    const auto m = elm::train(t, opt, r4);
    const auto rep = elm::ssd_sensitivity(m, t.X);
    std::vector<std::size_t> top(rep.rank.begin(), rep.rank.begin() + 3);
    std::sort(top.begin(), top.end());
    top3 += top == std::vector<std::size_t>{0, 1, 2};
    worst_fd = std::max(worst_fd, ssd_fd_error(m, t.X, rep.ssd));
  }
  return {min_r2 >= 0.95 && top3 >= 19 && worst_fd <= 1e-4 && slowest < 5.0,
          fmt("min pooled R2 %.4f (need 0.95), top-3 %d/20 (need 19), FD rel err %.2e (limit 1e-4), fold train %.2fs",
              min_r2, top3, worst_fd, slowest)};
}

Outcome hsic_selection() {
  int exact = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    synth::Rng rng(seed);
    const FeatureTable t = presets::feature_set(500, rng);
    exact += hsic::hsic_lasso(t, {}, rng).selected == std::vector<std::size_t>{0, 1, 2};
  }
  return {exact >= 19, fmt("exact relevant set in %d/20 (need 19)", exact)};
}

Outcome schedule_detection() {
  int weekly = 0, random = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    synth::Rng rng(seed);
    const auto s = schedule::dominant_schedule(presets::weekly_channel(700, rng).uploads);
    weekly += s && s->period == 7;
    synth::Rng r2(10000 + seed);
    random += schedule::dominant_schedule(presets::random_uploads(700, 1.0 / 7.0, r2)).has_value();
  }
  return {weekly >= 95 && random <= 10, fmt("weekly detected %d/100 (need 95), random flagged %d/100 (limit 10)", weekly, random)};
}

Outcome window_ratio_exact() {
  int bad = 0, total = 0;
  auto check = [&](double got, double want) {
    ++total;
    bad += std::abs(got - want) > 4.0 * std::numeric_limits<double>::epsilon() * std::abs(want);
  };
  std::vector<double> step(13, 1.0);
  for (int t = 7; t < 13; ++t) step[static_cast<std::size_t>(t)] = 2.0;
  check(metaopt::window_ratio(step, 6).ratio, 13.0 / 7.0);
  check(metaopt::window_ratio(std::vector<double>(20, 5.0), 10).ratio, 1.0);
  // pre [1, 7] = 31, post [7, 13] = 36; disjoint pre [0, 6] = 27.
  const std::vector<double> v = {3, 8, 1, 0, 4, 9, 2, 7, 7, 5, 1, 6, 2, 8, 3};
  check(metaopt::window_ratio(v, 7).ratio, 36.0 / 31.0);
  check(metaopt::window_ratio(v, 7, true).ratio, 36.0 / 27.0);
  VideoRecord rec;
  rec.video_id = "v";
  rec.daily_views.values = v;
  check(metaopt::opt_sensitivity(rec, {"v", 7, OptKind::title}).s, 36.0 / 31.0);
  ++total;
  bad += metaopt::window_ratio(v, 5).valid || metaopt::window_ratio(v, 9).valid;
  return {bad == 0, fmt("%d/%d hand fixtures exact", total - bad, total)};
}

Outcome invariants() {
  std::vector<std::string> failed;
  synth::Rng rng(77);

  for (int trial = 0; trial < 20; ++trial) {
    const int r = 1 + static_cast<int>(rng.below(5));
    Matrix A = Matrix::NullaryExpr(8, r, [&] { return rng.normal(); }) * Matrix::NullaryExpr(r, 6, [&] { return rng.normal(); });
    const Matrix P = numkit::pinv(A);
    const double e = std::max({(A * P * A - A).cwiseAbs().maxCoeff(), (P * A * P - P).cwiseAbs().maxCoeff(),
                               ((A * P).transpose() - A * P).cwiseAbs().maxCoeff(),
                               ((P * A).transpose() - P * A).cwiseAbs().maxCoeff()});
    if (e > 1e-9 * std::max(1.0, A.cwiseAbs().maxCoeff())) {
      failed.push_back("penrose");
      break;
    }
  }

  {
    Matrix X = Matrix::NullaryExpr(60, 10, [&] { return rng.normal(); });
    Vector y = X.col(0) * 2.0 - X.col(4) + Vector::NullaryExpr(60, [&] { return 0.3 * rng.normal(); });
    bool ok = true;
    for (bool nonneg : {false, true})
      for (double lambda : {0.5, 5.0, 40.0}) {
        numkit::LassoOptions o;
        o.nonneg = nonneg;
        o.tol = 1e-12;
        const Vector w = numkit::lasso(X, y, lambda, o);
        const Vector g = X.transpose() * (y - X * w);
        const double tol = 1e-6 * std::max(1.0, lambda);
        for (Eigen::Index j = 0; j < w.size(); ++j) {
          if (w(j) > 0) ok = ok && std::abs(g(j) - lambda) <= tol;
          else if (w(j) < 0) ok = ok && !nonneg && std::abs(g(j) + lambda) <= tol;
          else ok = ok && (nonneg ? g(j) : std::abs(g(j))) <= lambda + tol;
        }
      }
    if (!ok) failed.push_back("lasso-kkt");
  }

  {
    bool mono = true, decomp = true;
    for (int trial = 0; trial < 200; ++trial) {
      gompertz::Params p;
      p.components.push_back({0.0, rng.uniform(1, 1e5), rng.uniform(0.05, 5), rng.uniform(0.01, 3), rng.uniform(0, 50)});
      for (int k = 0; k < 2; ++k)
        p.components.push_back({rng.uniform(1, 100), rng.uniform(1, 1e5), rng.uniform(0.05, 5), rng.uniform(0.01, 3),
                                rng.uniform(0, 50)});
      const auto d = gompertz::decompose(p, 150);
      for (std::size_t t = 0; t < d.total.size(); ++t) {
        if (t > 0 && d.total[t] < d.total[t - 1]) mono = false;
        double sum = d.viral[t] + d.migration[t];
        for (const auto& ev : d.events) sum += ev[t];
        const double model = gompertz::eval_model(p, static_cast<double>(t));
        if (std::abs(sum - model) > 1e-9 * std::max(1.0, model)) decomp = false;
      }
    }
    if (!mono) failed.push_back("gompertz-monotone");
    if (!decomp) failed.push_back("decomposition");
  }

  {
    synth::Rng r(5);
    const FeatureTable t = presets::feature_set(300, r, 8);
    elm::TrainOptions opt;
    opt.neurons = 30;
    elm::ElmModel m = elm::train(t, opt, r);
    const auto a = elm::ssd_sensitivity(m, t.X).ssd;
    m.beta *= 3.0;
    const auto b = elm::ssd_sensitivity(m, t.X).ssd;
    for (std::size_t k = 0; k < a.size(); ++k)
      if (std::abs(b[k] - 9.0 * a[k]) > 1e-9 * std::max(1e-300, 9.0 * a[k])) {
        failed.push_back("ssd-scale");
        break;
      }
  }

  for (int n : {16, 17, 101, 364}) {
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = rng.normal() + 3.0;
    double mean = 0.0, energy = 0.0;
    for (double v : x) mean += v / n;
    for (double v : x) energy += (v - mean) * (v - mean);
    const auto P = numkit::periodogram(x);
    double total = 0.0;
    for (std::size_t j = 0; j < P.size(); ++j)
      total += (n % 2 == 0 && static_cast<int>(j + 1) == n / 2 ? 1.0 : 2.0) * P[j].power;
    if (std::abs(total - energy) > 1e-9 * energy) {
      failed.push_back("parseval");
      break;
    }
  }

  std::string list;
  for (const auto& f : failed) list += " " + f;
  return {failed.empty(), failed.empty() ? "penrose, lasso-kkt, gompertz-monotone, decomposition, ssd-scale, parseval hold"
                                         : "violated:" + list};
}

int run_cli(const std::string& args, int threads) {
  const std::string cmd =
      "ENGAGEDYN_THREADS=" + std::to_string(threads) + " " + ENGAGEDYN_CLI_PATH + " " + args + " >/dev/null 2>&1";
  const int s = std::system(cmd.c_str());
  return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  if (!fs::exists(dir)) return files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string body = testing_support::slurp(e.path());
    if (e.path().filename() == "manifest.json") {
      auto m = nlohmann::json::parse(body);
      m.erase("wall_time");
      body = m.dump();
    }
    files[fs::relative(e.path(), dir).string()] = body;
  }
  return files;
}

void write_metaopt(const fs::path& d) {
  fs::create_directories(d);
  std::string videos = "video_id,channel_id,upload_date,category,keywords\n", views = "video_id,day_index,views\n",
              traffic = "video_id,day_index,source,views\n", events = "video_id,day_index,kind\n";
  for (int i = 0; i < 6; ++i) {
    const std::string id = "v" + std::to_string(i);
    videos += id + ",c1,2020-01-01,music,pop\n";
    for (int t = 0; t < 120; ++t) {
      const int v = 100 + 7 * i + (t >= 20 + i && i % 2 == 0 ? 40 : 0);
      views += id + "," + std::to_string(t) + "," + std::to_string(v) + "\n";
      traffic += id + "," + std::to_string(t) + ",related," + std::to_string(v / 3) + "\n";
    }
    events += id + "," + std::to_string(20 + i) + ",title\n";
  }
  testing_support::spit(d / "videos.csv", videos);
  testing_support::spit(d / "views.csv", views);
  testing_support::spit(d / "traffic.csv", traffic);
  testing_support::spit(d / "events.csv", events);
}

Outcome cli_determinism() {
  testing_support::TempDir tmp("acceptance");
  const auto in = [&](const std::string& rel) { return tmp.str(rel); };
  for (const auto& [preset, dir, extra] : std::vector<std::tuple<std::string, std::string, std::string>>{
           {"features", "feat", "--count 400"},
           {"day41-event", "d41", ""},
           {"two-event", "two", ""},
           {"playlist", "pl", ""},
           {"causal-channel", "cc", "--count 3"},
           {"weekly-schedule", "wk", "--count 3"}})
    if (run_cli("synth --preset " + preset + " --seed 3 --output " + in(dir) + " " + extra, 1) != 0)
      return {false, "synth preset " + preset + " failed"};

  write_metaopt(tmp.path() / "mo");
  const std::string feat = in("feat/videos.csv") + " " + in("feat/views.csv");
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "synth --preset two-event --seed 9"},
      {"train-elm", "train-elm --input " + feat + " --folds 5 --neurons 50"},
      {"sensitivity", "sensitivity --input " + feat + " --hsic --neurons 50"},
      {"hsic", "hsic --input " + feat},
      {"granger", "granger --input " + in("cc/channels.csv") + " " + in("cc/videos.csv")},
      {"schedule", "schedule --input " + in("wk/channels.csv")},
      {"fit-gompertz", "fit-gompertz --input " + in("two/views.csv") + " --oracle --emit-plot-data"},
      {"fit-gompertz-playlist", "fit-gompertz --input " + in("pl/views.csv") + " --playlist"},
      {"metaopt", "metaopt --input " + in("mo/videos.csv") + " " + in("mo/views.csv") + " " + in("mo/events.csv") + " " +
                      in("mo/traffic.csv") + " --min-traffic-events 1"},
  };
  std::vector<std::string> differing;
  int n_ok = 0;
  for (const auto& [name, args] : commands) {
    const std::string a = in("runs/" + name + "_a"), b = in("runs/" + name + "_b");
    const int ca = run_cli(args + " --output " + a, 1), cb = run_cli(args + " --output " + b, 3);
    const auto sa = snapshot(a), sb = snapshot(b);
    if (ca != cb || sa.empty() || sa != sb) differing.push_back(name + "(exit " + std::to_string(ca) + "/" + std::to_string(cb) + ")");
    else ++n_ok;
  }
  // predict needs a model from the first run.
  {
    const std::string model = in("runs/train-elm_a/model.json");
    const std::string a = in("runs/predict_a"), b = in("runs/predict_b");
    const std::string args = "predict --input " + model + " " + in("feat/videos.csv") + " --output ";
    const int ca = run_cli(args + a, 1), cb = run_cli(args + b, 3);
    if (ca != 0 || cb != 0 || snapshot(a) != snapshot(b)) differing.push_back("predict");
    else ++n_ok;
  }
  std::string list;
  for (const auto& d : differing) list += " " + d;
  return {differing.empty(), differing.empty() ? fmt("%d commands byte-identical across runs and thread counts", n_ok)
                                               : "differing or failing:" + list};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gompertz-day41-recovery", gompertz_day41},
      {"gompertz-oracle-equivalence", oracle_equivalence},
      {"granger-size-and-power", granger_size_power},
      {"ljung-box-size", ljung_box_size},
      {"elm-accuracy-and-ssd", elm_regression},
      {"hsic-lasso-selection", hsic_selection},
      {"schedule-periodicity", schedule_detection},
      {"window-ratio-exactness", window_ratio_exact},
      {"invariant-suite", invariants},
      {"cli-determinism", cli_determinism},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
