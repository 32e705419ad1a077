#pragma once

// Command-line front end: one binary, one subcommand per analysis. Every run
// writes its artifacts plus manifest.json into --output.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "engagedyn/csv.hpp"
#include "engagedyn/data.hpp"
#include "engagedyn/elm.hpp"
#include "engagedyn/format.hpp"
#include "engagedyn/gompertz.hpp"
#include "engagedyn/granger.hpp"
#include "engagedyn/hsic.hpp"
#include "engagedyn/metaopt.hpp"
#include "engagedyn/parallel.hpp"
#include "engagedyn/presets.hpp"
#include "engagedyn/report.hpp"
#include "engagedyn/schedule.hpp"
#include "engagedyn/synth.hpp"

namespace engagedyn::cli {

namespace fs = std::filesystem;
using report::Json;

inline constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

/// Flag combinations CLI11 cannot express; reported like parse errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::vector<std::string> inputs;
  std::string output;
  std::uint64_t seed = 0;
  std::string format = "json";
  bool plot = false;
};

// ---------------------------------------------------------------------------
// Output collection

class Run {
 public:
  Run(std::string command, const Common& c) : command_(std::move(command)), common_(c) {}

  const Common& common() const { return common_; }
  bool json() const { return common_.format == "json"; }

  void write(const std::string& name, const std::string& content) {
    const fs::path dir(common_.output);
    fs::create_directories(dir);
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw InvalidInput("cannot write output file: " + (dir / name).string());
    out << content;
    if (!out) throw InvalidInput("failed writing output file: " + (dir / name).string());
    outputs_.insert(name);
  }

  void write_json(const std::string& name, const Json& j) { write(name, j.dump(2) + "\n"); }

  void write_csv(const std::string& name, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
    std::string s = csv::join_row(header);
    for (const auto& r : rows) s += csv::join_row(r);
    write(name, s);
  }

  /// Two-column x,y plot file, written only with --emit-plot-data.
  void plot(const std::string& name, const std::vector<std::string>& x, const std::vector<double>& y) {
    if (!common_.plot) return;
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < x.size(); ++i) rows.push_back({x[i], format_real(y[i])});
    write_csv(name, {"x", "y"}, rows);
  }

  /// Per-item failure inside a batch; the run continues.
  void item_error(const std::string& id, const Error& e) {
    std::lock_guard<std::mutex> lock(mu_);
    errors_.emplace_back(id, e.what());
    if (e.error_class() == ErrorClass::numerical) numerical_ = true;
  }

  bool numerical_failure() const { return numerical_; }
  const std::vector<std::pair<std::string, std::string>>& errors() const { return errors_; }

  void manifest(const std::string& status, double wall_time, const std::string& error = "") {
    Json errs = Json::array();
    auto sorted = errors_;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& [id, msg] : sorted) errs.push_back(Json{{"id", id}, {"error", msg}});
    Json j{{"command", command_},
           {"version", kVersion},
           {"seed", common_.seed},
           {"inputs", common_.inputs},
           {"outputs", std::vector<std::string>(outputs_.begin(), outputs_.end())},
           {"wall_time", wall_time},
           {"status", status},
           {"item_errors", std::move(errs)}};
    if (!error.empty()) j["error"] = error;
    const fs::path dir(common_.output);
    fs::create_directories(dir);
    std::ofstream(dir / "manifest.json", std::ios::binary) << j.dump(2) << "\n";
  }

 private:
  std::string command_;
  Common common_;
  std::set<std::string> outputs_;
  std::vector<std::pair<std::string, std::string>> errors_;
  bool numerical_ = false;
  std::mutex mu_;
};

inline std::string num(double v) { return std::isfinite(v) ? format_real(v) : (std::isnan(v) ? "NA" : (v > 0 ? "inf" : "-inf")); }
inline std::string num(long v) { return std::to_string(v); }
template <class T>
std::string num(const std::optional<T>& v) {
  return v ? num(*v) : std::string("NA");
}

/// File-name-safe form of an id.
inline std::string safe_name(const std::string& id) {
  std::string s = id;
  for (auto& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_' && ch != '.') ch = '_';
  return s;
}

// ---------------------------------------------------------------------------
// Input detection

struct Inputs {
  DatasetPaths paths;
  std::optional<std::string> model;
};

/// Classifies each --input by content: a JSON object is an ELM model, CSV
/// files by their header row.
inline Inputs detect_inputs(const std::vector<std::string>& files) {
  Inputs in;
  auto assign = [](std::optional<std::string>& slot, const std::string& path, const char* kind) {
    if (slot) throw InvalidInput("two " + std::string(kind) + " inputs given: " + *slot + " and " + path);
    slot = path;
  };
  for (const auto& path : files) {
    const std::string text = csv::read_file(path);
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
      assign(in.model, path, "model");
      continue;
    }
    const auto eol = text.find('\n');
    const csv::Table head = csv::parse(text.substr(0, eol == std::string::npos ? text.size() : eol + 1), path);
    auto has = [&](const char* c) { return head.column(c) >= 0; };
    if (has("subscribers") && has("date"))
      assign(in.paths.channels, path, "channels");
    else if (has("source"))
      assign(in.paths.traffic, path, "traffic");
    else if (has("kind"))
      assign(in.paths.events, path, "events");
    else if (has("upload_date"))
      assign(in.paths.videos, path, "videos");
    else if (has("video_id") && has("day_index") && has("views"))
      assign(in.paths.views, path, "views");
    else
      throw InvalidInput(path + ": cannot tell the input type from its header");
  }
  return in;
}

inline void require(const std::optional<std::string>& slot, const char* what) {
  if (!slot) throw InvalidInput(std::string("missing input: a ") + what + " file is required");
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string preset;
  int count = 0;  // 0: preset default
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> p{"day41-event",    "paper-fig-exo", "two-event", "playlist",
                                          "weekly-schedule", "causal-channel", "null-channel", "features"};
  return p;
}

inline std::string views_csv(const std::vector<std::pair<std::string, std::vector<long long>>>& videos) {
  std::string s = csv::join_row({"video_id", "day_index", "views"});
  for (const auto& [id, daily] : videos)
    for (std::size_t d = 0; d < daily.size(); ++d) s += csv::join_row({id, std::to_string(d), std::to_string(daily[d])});
  return s;
}

inline std::string channels_csv(const std::vector<ChannelSeries>& chans) {
  const bool comments = !chans.empty() && chans.front().has_comments();
  std::vector<std::string> head{"channel_id", "date", "subscribers", "views", "uploads"};
  if (comments) head.push_back("comments");
  std::string s = csv::join_row(head);
  for (const auto& ch : chans)
    for (std::size_t t = 0; t < ch.size(); ++t) {
      std::vector<std::string> row{ch.channel_id, ch.dates[t].str(), format_real(ch.subscribers[t]),
                                   format_real(ch.views[t]), format_real(ch.uploads[t])};
      if (comments) row.push_back(format_real(ch.comments[t]));
      s += csv::join_row(row);
    }
  return s;
}

inline std::string numbered(const std::string& prefix, int i, int n) {
  const int width = n < 10 ? 1 : (n < 100 ? 2 : (n < 1000 ? 3 : 4));
  std::string s = std::to_string(i);
  return prefix + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

inline void cmd_synth(Run& run, const SynthArgs& a) {
  const synth::Rng root(run.common().seed);
  Json truth{{"preset", a.preset}, {"seed", run.common().seed}};
  auto truth_curve = [&](const std::string& id, const gompertz::Params& p, int T) {
    std::vector<std::string> x;
    std::vector<double> y;
    for (int t = 0; t < T; ++t) {
      x.push_back(std::to_string(t));
      y.push_back(gompertz::eval_model(p, t));
    }
    run.plot("plot_" + safe_name(id) + "_truth.csv", x, y);
  };

  const bool day41 = a.preset == "day41-event" || a.preset == "paper-fig-exo";  // same scenario, two names
  if (day41 || a.preset == "two-event" || a.preset == "playlist") {
    const int n = a.count > 0 ? a.count : (a.preset == "playlist" ? 8 : 1);
    std::vector<std::pair<std::string, std::vector<long long>>> videos;
    Json items = Json::array();
    const auto playlist = presets::playlist_params(n);
    for (int i = 0; i < n; ++i) {
      synth::Rng rng = root.split(static_cast<std::uint64_t>(i));
      const std::string id = a.preset == "playlist" ? numbered("v", i + 1, n) : "v" + std::to_string(i + 1);
      gompertz::Params p;
      TimeSeries ts;
      int T = 0;
      if (day41) {
        p = presets::day41_params();
        T = presets::kDay41Horizon;
        ts = presets::day41_series(rng);
      } else if (a.preset == "two-event") {
        auto c = presets::two_event_case(rng);
        p = c.params;
        T = c.horizon;
        ts = c.cumulative;
      } else {
        p = playlist[static_cast<std::size_t>(i)];
        T = 90;
        ts = synth::gen_gompertz(p, T, {0.0, presets::kDay41Noise}, rng);
      }
      videos.emplace_back(id, presets::daily_counts(ts.values));
      items.push_back(Json{{"video_id", id}, {"horizon", T}, {"noise_relative", presets::kDay41Noise},
                           {"components", report::components_json(p)}});
      truth_curve(id, p, T);
    }
    truth["videos"] = std::move(items);
    run.write("views.csv", views_csv(videos));
  } else if (a.preset == "weekly-schedule" || a.preset == "causal-channel" || a.preset == "null-channel") {
    const bool weekly = a.preset == "weekly-schedule";
    const int n = a.count > 0 ? a.count : (weekly ? 10 : 20);
    const int T = weekly ? 700 : 500;
    static const std::vector<std::string> cats{"gaming", "music"};
    std::vector<ChannelSeries> chans;
    Json items = Json::array();
    std::string videos = csv::join_row({"video_id", "channel_id", "upload_date", "category"});
    for (int i = 0; i < n; ++i) {
      synth::Rng rng = root.split(static_cast<std::uint64_t>(i));
      const std::string id = numbered("c", i + 1, n);
      const std::string& cat = cats[static_cast<std::size_t>(i) % cats.size()];
      Json item{{"channel_id", id}, {"category", cat}};
      if (weekly) {
        synth::ScheduleSample s;
        chans.push_back(presets::weekly_channel(T, rng, id, &s));
        item["period"] = 7;
        item["off_schedule_days"] = s.off_schedule_days;
      } else if (a.preset == "causal-channel") {
        chans.push_back(presets::causal_channel(T, rng, id));
        item["a"] = std::vector<double>{0.5};
        item["b"] = std::vector<double>{0.5};
        item["intercept"] = 0.0;
      } else {
        chans.push_back(presets::null_channel(T, rng, id));
        item["a"] = std::vector<double>{0.5};
        item["b"] = std::vector<double>{};
        item["intercept"] = 50.0;
      }
      videos += csv::join_row({id + "-v1", id, "2020-01-01", cat});
      items.push_back(std::move(item));
      if (run.common().plot) {
        std::vector<std::string> x;
        for (std::size_t t = 0; t < chans.back().size(); ++t) x.push_back(std::to_string(t));
        run.plot("plot_" + id + (weekly ? "_uploads.csv" : "_subscribers.csv"), x,
                 weekly ? chans.back().uploads : chans.back().subscribers);
      }
    }
    truth["channels"] = std::move(items);
    run.write("channels.csv", channels_csv(chans));
    run.write("videos.csv", videos);
  } else {  // features
    const int n = a.count > 0 ? a.count : 1000;
    synth::Rng rng = root.split(0);
    const FeatureTable t = presets::feature_set(n, rng);
    std::vector<std::string> head{"video_id", "channel_id", "upload_date", "category"};
    for (const auto& f : t.names) head.push_back("f_" + f);
    std::string videos = csv::join_row(head);
    std::vector<std::pair<std::string, std::vector<long long>>> views;
    for (Eigen::Index i = 0; i < t.X.rows(); ++i) {
      std::vector<std::string> row{t.ids[static_cast<std::size_t>(i)], "ch1", "2020-01-01", "synthetic"};
      for (Eigen::Index j = 0; j < t.X.cols(); ++j) row.push_back(format_real(t.X(i, j)));
      videos += csv::join_row(row);
      // 14-day total whose log10(total + 1) is the generated target plus 3.
      const long long total = std::max(0LL, std::llround(std::pow(10.0, 3.0 + t.y(i)) - 1.0));
      std::vector<long long> daily(14, total / 14);
      for (long long r = 0; r < total % 14; ++r) ++daily[static_cast<std::size_t>(r)];
      views.emplace_back(t.ids[static_cast<std::size_t>(i)], std::move(daily));
    }
    std::vector<std::string> rel;
    for (int j : presets::relevant_features()) rel.push_back(t.names[static_cast<std::size_t>(j)]);
    truth["relevant"] = rel;
    truth["link"] = "additive_sigmoid";
    truth["steepness"] = 5.0;
    truth["noise_sigma"] = 0.05;
    truth["target_offset"] = 3.0;
    run.write("videos.csv", videos);
    run.write("views.csv", views_csv(views));
  }
  run.write_json("truth.json", truth);
}

// ---------------------------------------------------------------------------
// ELM family

struct ElmArgs {
  int neurons = 100;
  std::string transfer = "sigmoid";
  double ridge = 0.0;
  int folds = 10;
  double pearson = 0.9;
  int horizon = 14;
};

struct Prepared {
  FeatureTable raw;
  ScaleResult scaled;
  PearsonResult pearson;
  std::vector<std::string> skipped;
};

inline Prepared prepare_features(const Dataset& ds, const ElmArgs& a) {
  Prepared p;
  p.raw = feature_table(ds, a.horizon, &p.skipped);
  if (p.raw.names.empty()) throw InvalidInput("videos file has no f_ feature columns");
  if (p.raw.X.rows() < 2)
    throw InsufficientData("need at least 2 videos with " + std::to_string(a.horizon) + " observed days");
  p.pearson = pearson_eliminate(p.raw, a.pearson);
  if (p.pearson.kept.empty()) throw InsufficientData("no feature survived the correlation/variance filter");
  p.scaled = scale_features(select_columns(p.raw, p.pearson.kept));
  return p;
}

inline elm::TrainOptions train_options(const ElmArgs& a) {
  elm::TrainOptions o;
  o.neurons = a.neurons;
  o.transfer = *elm::parse_transfer(a.transfer);
  o.ridge = a.ridge;
  return o;
}

inline elm::ElmModel fit_model(const Prepared& p, const ElmArgs& a, const synth::Rng& root) {
  synth::Rng rng = root.split(2);
  elm::ElmModel m = elm::train(p.scaled.scaled, train_options(a), rng);
  m.scaler = p.scaled.scaler;
  return m;
}

inline Json prep_json(const Prepared& p) {
  Json dropped = Json::array();
  for (const auto& d : p.pearson.dropped)
    dropped.push_back(Json{{"name", d.name}, {"partner", d.partner.empty() ? Json(nullptr) : Json(d.partner)},
                           {"abs_rho", d.abs_rho}});
  std::vector<std::string> warnings = p.pearson.warnings;
  warnings.insert(warnings.end(), p.scaled.warnings.begin(), p.scaled.warnings.end());
  return Json{{"n_samples", p.raw.X.rows()},
              {"skipped_videos", p.skipped},
              {"features_kept", p.pearson.kept},
              {"features_dropped", std::move(dropped)},
              {"warnings", warnings}};
}

inline void cmd_train_elm(Run& run, const ElmArgs& a) {
  const Inputs in = detect_inputs(run.common().inputs);
  require(in.paths.videos, "videos");
  require(in.paths.views, "views");
  const Dataset ds = load_dataset(in.paths);
  const Prepared p = prepare_features(ds, a);
  const synth::Rng root(run.common().seed);
  synth::Rng cv_rng = root.split(1);
  const elm::EvalReport ev = elm::kfold_eval(p.scaled.scaled.X, p.scaled.scaled.y, a.folds, train_options(a), cv_rng);
  const elm::ElmModel m = fit_model(p, a, root);
  run.write_json("model.json", report::model_to_json(m));

  Json rep = prep_json(p);
  rep["neurons"] = a.neurons;
  rep["transfer"] = a.transfer;
  rep["ridge"] = a.ridge;
  rep["seed"] = run.common().seed;
  rep["cv"] = report::to_json(ev);
  rep["training_rmse"] = std::sqrt(m.training_sse / static_cast<double>(p.raw.X.rows()));
  if (run.json()) {
    run.write_json("train_report.json", rep);
  } else {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t f = 0; f < ev.fold_rmse.size(); ++f)
      rows.push_back({std::to_string(f), num(ev.fold_rmse[f]), num(ev.fold_r2[f])});
    rows.push_back({"mean", num(ev.rmse), num(ev.r2_pooled)});
    run.write_csv("train_report.csv", {"fold", "rmse", "r2"}, rows);
  }
  std::vector<std::string> x;
  std::vector<double> y;
  for (Eigen::Index i = 0; i < p.raw.y.size(); ++i) {
    x.push_back(num(p.raw.y(i)));
    y.push_back(ev.predictions(i));
  }
  run.plot("plot_cv_predictions.csv", x, y);
}

struct SensitivityArgs {
  ElmArgs elm;
  bool with_hsic = false;
  double lambda = 20.0;
};

inline void cmd_sensitivity(Run& run, const SensitivityArgs& a) {
  const Inputs in = detect_inputs(run.common().inputs);
  require(in.paths.videos, "videos");
  require(in.paths.views, "views");
  const Dataset ds = load_dataset(in.paths);
  const synth::Rng root(run.common().seed);
  elm::ElmModel m;
  FeatureTable table;
  Json rep;
  if (in.model) {
    m = report::model_from_json(Json::parse(csv::read_file(*in.model), nullptr, false), *in.model);
    std::vector<std::string> skipped;
    const FeatureTable raw = feature_table(ds, a.elm.horizon, &skipped);
    table = select_columns(raw, m.feature_names);
    if (m.scaler) table.X = m.scaler->transform(table.X);
    rep["model_source"] = *in.model;
    rep["n_samples"] = table.X.rows();
  } else {
    const Prepared p = prepare_features(ds, a.elm);
    m = fit_model(p, a.elm, root);
    table = p.scaled.scaled;
    rep["model_source"] = "trained";
    const Json prep = prep_json(p);
    for (auto it = prep.begin(); it != prep.end(); ++it) rep[it.key()] = it.value();
  }
  if (table.X.rows() < 1) throw InsufficientData("no samples to evaluate sensitivity on");
  const elm::SensitivityReport s = elm::ssd_sensitivity(m, table.X);
  rep["seed"] = run.common().seed;
  rep["features"] = report::to_json(s);
  std::optional<hsic::HsicResult> h;
  if (a.with_hsic) {
    hsic::HsicOptions ho;
    ho.lambda = a.lambda;
    synth::Rng hr = root.split(3);
    h = hsic::hsic_lasso(table, ho, hr);
    rep["hsic"] = report::to_json(*h);
  } else {
    rep["hsic"] = nullptr;
  }
  if (run.json()) {
    run.write_json("sensitivity.json", rep);
  } else {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t pos = 0; pos < s.rank.size(); ++pos) {
      const auto k = s.rank[pos];
      rows.push_back({s.names[k], num(s.ssd[k]), num(s.normalized[k]), std::to_string(pos + 1),
                      h ? num(h->alpha[k]) : "NA"});
    }
    run.write_csv("sensitivity.csv", {"name", "ssd", "normalized", "rank", "hsic_alpha"}, rows);
  }
  std::vector<std::string> x;
  std::vector<double> y;
  for (auto k : s.rank) {
    x.push_back(s.names[k]);
    y.push_back(s.normalized[k]);
  }
  run.plot("plot_ssd.csv", x, y);
}

inline void cmd_predict(Run& run) {
  const Inputs in = detect_inputs(run.common().inputs);
  require(in.model, "model JSON");
  require(in.paths.videos, "videos");
  const elm::ElmModel m = report::model_from_json(Json::parse(csv::read_file(*in.model), nullptr, false), *in.model);
  const Dataset ds = load_dataset(in.paths);
  long clipped = 0;
  Json preds = Json::array();
  std::vector<std::vector<std::string>> rows;
  for (const auto& v : ds.videos) {
    const double y = elm::predict(m, v.features, &clipped);
    const double views = std::pow(10.0, y) - 1.0;
    preds.push_back(Json{{"video_id", v.video_id}, {"log_views", y}, {"views", views}});
    rows.push_back({v.video_id, num(y), num(views)});
  }
  if (run.json())
    run.write_json("predictions.json", Json{{"n", static_cast<long>(ds.videos.size())}, {"clipped_values", clipped},
                                            {"predictions", std::move(preds)}});
  else
    run.write_csv("predictions.csv", {"video_id", "log_views", "views"}, rows);
}

struct HsicArgs {
  double lambda = 20.0;
  std::size_t cap = 2000;
  int horizon = 14;
};

inline void cmd_hsic(Run& run, const HsicArgs& a) {
  const Inputs in = detect_inputs(run.common().inputs);
  require(in.paths.videos, "videos");
  require(in.paths.views, "views");
  const Dataset ds = load_dataset(in.paths);
  const FeatureTable t = feature_table(ds, a.horizon);
  if (t.names.empty()) throw InvalidInput("videos file has no f_ feature columns");
  // Kernel bandwidths are scale-invariant per feature, so raw values suffice.
  hsic::HsicOptions o;
  o.lambda = a.lambda;
  o.subsample_cap = a.cap;
  synth::Rng rng(run.common().seed);
  const hsic::HsicResult r = hsic::hsic_lasso(t, o, rng);
  Json rep = report::to_json(r);
  rep["seed"] = run.common().seed;
  if (run.json()) {
    run.write_json("hsic.json", rep);
  } else {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t k = 0; k < r.alpha.size(); ++k)
      rows.push_back({r.names[k], num(r.alpha[k]), num(r.bandwidth[k]), r.alpha[k] > 0.0 ? "1" : "0"});
    run.write_csv("hsic.csv", {"name", "alpha", "bandwidth", "selected"}, rows);
  }
  run.plot("plot_hsic.csv", r.names, r.alpha);
}

// ---------------------------------------------------------------------------
// Channel analyses

inline void cmd_granger(Run& run, const granger::CausalityOptions& o) {
  const Inputs in = detect_inputs(run.common().inputs);
  require(in.paths.channels, "channels");
  const Dataset ds = load_dataset(in.paths);
  std::vector<std::optional<granger::GrangerReport>> out(ds.channels.size());
  parallel_for(ds.channels.size(), [&](std::size_t i) {
    try {
      out[i] = granger::channel_causality(ds.channels[i], o);
    } catch (const Error& e) {
      run.item_error(ds.channels[i].channel_id, e);
    }
  });
  std::vector<granger::GrangerReport> ok;
  Json chans = Json::array();
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : out) {
    if (!r) continue;
    ok.push_back(*r);
    chans.push_back(report::to_json(*r));
    rows.push_back({r->channel_id, r->category, num(r->ljung_box.Q), num(static_cast<long>(r->ljung_box.dof)),
                    num(r->ljung_box.p), num(r->wald.W), num(r->wald.p), r->adequacy_pass ? "1" : "0",
                    r->causality ? (*r->causality ? "1" : "0") : "NA"});
  }
  if (ok.empty() && !ds.channels.empty() && !run.numerical_failure())
    throw InsufficientData("no channel could be analyzed: " + run.errors().front().second);
  const granger::CohortSummary cohort = granger::cohort_summary(ok);
  Json errs = Json::array();
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!out[i])
      for (const auto& [id, msg] : run.errors())
        if (id == ds.channels[i].channel_id) errs.push_back(Json{{"channel_id", id}, {"error", msg}});
  if (run.json()) {
    run.write_json("granger.json", Json{{"options", Json{{"n_s", o.ar.n_s}, {"n_v", o.ar.n_v}, {"intercept", o.ar.intercept},
                                                         {"difference", o.ar.difference}, {"swap", o.ar.swap},
                                                         {"alpha", o.alpha}, {"lb_lags", o.lb_lags},
                                                         {"lb_count_exogenous", o.lb_count_exogenous}}},
                                        {"channels", std::move(chans)},
                                        {"errors", std::move(errs)},
                                        {"cohort", report::to_json(cohort)}});
  } else {
    run.write_csv("granger.csv", {"channel_id", "category", "lb_Q", "lb_dof", "lb_p", "wald_W", "wald_p", "adequacy_pass", "causality"},
                  rows);
    std::vector<std::vector<std::string>> crow;
    for (const auto& r : cohort.rows)
      crow.push_back({r.category, num(r.n_channels), num(r.n_adequate), num(r.n_causal), num(r.fraction)});
    run.write_csv("granger_cohort.csv", {"category", "n_channels", "n_adequate", "n_causal", "fraction_causal"}, crow);
  }
  std::vector<std::string> x;
  std::vector<double> y;
  for (const auto& r : cohort.rows) {
    x.push_back(r.category);
    y.push_back(*r.fraction);
  }
  run.plot("plot_causal_fraction.csv", x, y);
}

struct ScheduleArgs {
  long tolerance = 1;
  long window = 7;
  std::optional<double> max_upload_rate;
};

inline void cmd_schedule(Run& run, const ScheduleArgs& a) {
  const Inputs in = detect_inputs(run.common().inputs);
  require(in.paths.channels, "channels");
  const Dataset ds = load_dataset(in.paths);
  std::vector<const ChannelSeries*> use;
  Json excluded = Json::array();
  for (const auto& ch : ds.channels) {
    const double rate = schedule::upload_rate(ch);
    if (a.max_upload_rate && rate > *a.max_upload_rate)
      excluded.push_back(Json{{"channel_id", ch.channel_id}, {"upload_rate", rate}});
    else
      use.push_back(&ch);
  }
  std::vector<std::optional<schedule::ScheduleReport>> out(use.size());
  parallel_for(use.size(), [&](std::size_t i) {
    try {
      out[i] = schedule::analyze_channel(*use[i], a.tolerance, a.window);
    } catch (const Error& e) {
      run.item_error(use[i]->channel_id, e);
    }
  });
  Json chans = Json::array();
  std::vector<std::vector<std::string>> rows;
  long n_ok = 0, n_dom = 0, vg = 0, vn = 0, cg = 0, cn = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out[i]) continue;
    const auto& r = *out[i];
    ++n_ok;
    if (r.dominant_period) ++n_dom;
    for (double g : r.gains.views_gain) vg += g > 1.0, ++vn;
    for (double g : r.gains.comments_gain) cg += g > 1.0, ++cn;
    chans.push_back(report::to_json(r));
    rows.push_back({r.channel_id, num(r.dominant_period), num(r.peak_ratio), num(static_cast<long>(r.events.size())),
                    num(r.gains.fraction_views_gain), num(r.gains.fraction_comments_gain),
                    num(static_cast<long>(r.gains.skipped.size()))});
    if (run.common().plot) {
      const auto p = schedule::periodicity(use[i]->uploads);
      std::vector<std::string> x;
      std::vector<double> y;
      for (const auto& b : p.spectrum) {
        x.push_back(num(b.frequency));
        y.push_back(b.power);
      }
      run.plot("plot_" + safe_name(r.channel_id) + "_periodogram.csv", x, y);
    }
  }
  if (n_ok == 0 && !use.empty() && !run.numerical_failure())
    throw InsufficientData("no channel could be analyzed: " + run.errors().front().second);
  auto frac = [](long k, long n) { return n > 0 ? Json(static_cast<double>(k) / static_cast<double>(n)) : Json(nullptr); };
  Json errs = Json::array();
  for (const auto& [id, msg] : run.errors()) errs.push_back(Json{{"channel_id", id}, {"error", msg}});
  std::sort(errs.begin(), errs.end(), [](const Json& x, const Json& y) { return x["channel_id"] < y["channel_id"]; });
  const Json summary{{"n_channels", n_ok},
                     {"n_dominant", n_dom},
                     {"n_view_events", vn},
                     {"pooled_fraction_views_gain", frac(vg, vn)},
                     {"n_comment_events", cn},
                     {"pooled_fraction_comments_gain", frac(cg, cn)}};
  if (run.json()) {
    run.write_json("schedule.json", Json{{"tolerance", a.tolerance},
                                         {"window", a.window},
                                         {"max_upload_rate", a.max_upload_rate ? Json(*a.max_upload_rate) : Json(nullptr)},
                                         {"channels", std::move(chans)},
                                         {"excluded", std::move(excluded)},
                                         {"errors", std::move(errs)},
                                         {"summary", summary}});
  } else {
    run.write_csv("schedule.csv", {"channel_id", "dominant_period", "peak_ratio", "n_events", "fraction_views_gain",
                                   "fraction_comments_gain", "n_skipped"}, rows);
  }
}

// ---------------------------------------------------------------------------
// Gompertz

struct GompertzArgs {
  std::vector<std::string> videos;
  std::optional<int> k_max;
  std::optional<double> c_max;
  int multistart = 8;
  bool oracle = false;
  std::vector<long> candidates;
  std::optional<double> lambda;
  bool playlist = false;
};

inline void cmd_fit_gompertz(Run& run, const GompertzArgs& a) {
  const Inputs in = detect_inputs(run.common().inputs);
  require(in.paths.views, "views");
  const Dataset ds = load_dataset(in.paths);
  std::vector<const VideoRecord*> vids;
  if (a.videos.empty()) {
    for (const auto& v : ds.videos) vids.push_back(&v);
  } else {
    for (const auto& id : a.videos) {
      const VideoRecord* v = ds.find_video(id);
      if (!v) throw InvalidInput("video '" + id + "' not found in " + *in.paths.views);
      vids.push_back(v);
    }
  }
  if (vids.empty()) throw InsufficientData("no videos to fit");
  gompertz::FitConfig cfg;
  cfg.k_max = a.k_max;
  cfg.c_max = a.c_max;
  cfg.multistart = a.multistart;
  cfg.lambda = a.lambda;
  cfg.seed = run.common().seed;

  std::vector<std::vector<double>> series;
  for (const auto* v : vids) series.push_back(to_cumulative(v->daily_views).values);

  if (a.playlist) {
    std::vector<std::string> ids;
    for (const auto* v : vids) ids.push_back(v->video_id);
    const gompertz::PlaylistProfile p = gompertz::playlist_profile(series, ids, cfg);
    if (run.json()) {
      run.write_json("playlist.json", report::to_json(p));
    } else {
      std::vector<std::vector<std::string>> rows;
      for (const auto& e : p.videos)
        rows.push_back({std::to_string(e.index), e.id, e.ok ? "1" : "0", num(e.virality), num(e.migration), num(e.early_views)});
      run.write_csv("playlist.csv", {"index", "video_id", "ok", "virality", "migration", "early_views"}, rows);
    }
    std::vector<std::string> x;
    std::vector<double> y;
    for (const auto& e : p.videos)
      if (e.ok) {
        x.push_back(std::to_string(e.index));
        y.push_back(e.migration);
      }
    run.plot("plot_playlist_migration.csv", x, y);
    return;
  }

  struct Result {
    gompertz::GompertzFit fit;
    std::optional<gompertz::OracleResult> oracle;
  };
  std::vector<std::optional<Result>> out(vids.size());
  parallel_for(vids.size(), [&](std::size_t i) {
    try {
      Result r;
      if (a.oracle) {
        std::vector<long> cands = a.candidates;
        if (cands.empty()) cands = gompertz::estimate_kmax(series[i], cfg).candidates;
        r.oracle = gompertz::minlp_oracle(series[i], cands, cfg);
        r.fit = r.oracle->fit;
      } else {
        r.fit = gompertz::fit(series[i], cfg);
      }
      out[i] = std::move(r);
    } catch (const Error& e) {
      run.item_error(vids[i]->video_id, e);
    }
  });

  std::vector<std::vector<std::string>> summary;
  long n_ok = 0;
  for (std::size_t i = 0; i < vids.size(); ++i) {
    if (!out[i]) continue;
    ++n_ok;
    const auto& f = out[i]->fit;
    const std::string id = vids[i]->video_id, base = safe_name(id);
    const std::string decomp = "decomposition_" + base + ".csv";
    const auto& d = f.decomposition;
    std::vector<std::string> head{"day", "total", "viral", "migration"};
    for (std::size_t k = 0; k < d.events.size(); ++k) head.push_back("event_" + std::to_string(k + 1));
    std::vector<std::vector<std::string>> rows;
    for (std::size_t t = 0; t < d.total.size(); ++t) {
      std::vector<std::string> row{std::to_string(t), num(d.total[t]), num(d.viral[t]), num(d.migration[t])};
      for (const auto& e : d.events) row.push_back(num(e[t]));
      rows.push_back(std::move(row));
    }
    run.write_csv(decomp, head, rows);
    if (run.json()) {
      Json j = report::to_json(f, id, decomp);
      if (out[i]->oracle) j["oracle"] = report::to_json(*out[i]->oracle);
      run.write_json("fit_" + base + ".json", j);
    }
    for (std::size_t k = 0; k < f.params.components.size(); ++k) {
      const auto& c = f.params.components[k];
      summary.push_back({id, std::to_string(k), num(c.onset), num(c.M), num(c.eta), num(c.b), num(c.c), num(f.sse),
                         f.converged ? "1" : "0"});
    }
    if (run.common().plot) {
      std::vector<std::string> x;
      for (std::size_t t = 0; t < series[i].size(); ++t) x.push_back(std::to_string(t));
      run.plot("plot_" + base + "_observed.csv", x, series[i]);
      run.plot("plot_" + base + "_fitted.csv", x, d.total);
    }
  }
  if (n_ok == 0 && !run.numerical_failure())
    throw InsufficientData("no video could be fitted: " + run.errors().front().second);
  if (!run.json())
    run.write_csv("fits.csv", {"video_id", "component", "t", "M", "eta", "b", "c", "sse", "converged"}, summary);
}

// ---------------------------------------------------------------------------
// Meta-data optimization

struct MetaoptArgs {
  std::string kind = "all";
  bool disjoint = false;
  long min_traffic = metaopt::kDefaultMinTrafficEvents;
  std::vector<std::string> exclude_categories;
  std::vector<std::string> exclude_keywords;
  bool no_default_exclusions = false;
};

inline void cmd_metaopt(Run& run, const MetaoptArgs& a) {
  const Inputs in = detect_inputs(run.common().inputs);
  require(in.paths.videos, "videos");
  require(in.paths.views, "views");
  if (a.kind != "no-change") require(in.paths.events, "events");
  const Dataset ds = load_dataset(in.paths);
  metaopt::CohortOptions o;
  o.kind = *metaopt::parse_kind_filter(a.kind);
  o.disjoint = a.disjoint;
  if (a.no_default_exclusions) o.exclusions = {{}, {}};
  for (const auto& c : a.exclude_categories) o.exclusions.categories.push_back(c);
  for (const auto& k : a.exclude_keywords) o.exclusions.keywords.push_back(k);
  const metaopt::CohortFraction c = metaopt::cohort_fraction(ds, o);
  std::optional<metaopt::TrafficReport> traffic;
  if (in.paths.traffic) traffic = metaopt::traffic_ratios(ds, o, a.min_traffic);

  std::vector<std::vector<std::string>> rows;
  std::vector<double> s_valid;
  for (const auto& e : c.events) {
    rows.push_back({e.event.video_id, std::to_string(e.event.day),
                    e.no_change ? "no-change" : std::string(to_string(e.event.kind)), e.valid ? num(e.s) : "NA",
                    num(e.pre_mean), num(e.post_mean), e.valid ? "1" : "0", e.reason});
    if (e.valid) s_valid.push_back(e.s);
  }
  run.write_csv("metaopt_events.csv", {"video_id", "day", "kind", "s", "pre_mean", "post_mean", "valid", "reason"}, rows);
  Json rep = report::to_json(c, traffic);
  rep["disjoint_windows"] = a.disjoint;
  if (run.json()) {
    run.write_json("metaopt.json", rep);
  } else {
    std::vector<std::string> head{"kind", "n_events", "n_valid", "n_gain", "fraction_gain"};
    std::vector<std::string> row{std::string(metaopt::to_string(c.kind)), num(c.n_events), num(c.n_valid), num(c.n_gain),
                                 num(c.fraction_gain)};
    for (const char* src : {"related", "promoted", "search"}) {
      head.push_back(std::string(src) + "_median_ratio");
      head.push_back(std::string(src) + "_n");
      const auto& e = rep["per_source"][src];
      row.push_back(e["median_ratio"].is_string() ? "NA" : num(e["median_ratio"].get<double>()));
      row.push_back(num(e["n"].get<long>()));
    }
    run.write_csv("metaopt.csv", head, {row});
  }
  // Empirical CDF of the sensitivity ratio.
  std::sort(s_valid.begin(), s_valid.end());
  std::vector<std::string> x;
  std::vector<double> y;
  for (std::size_t i = 0; i < s_valid.size(); ++i) {
    x.push_back(num(s_valid[i]));
    y.push_back(static_cast<double>(i + 1) / static_cast<double>(s_valid.size()));
  }
  run.plot("plot_metaopt_cdf.csv", x, y);
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Popularity dynamics toolkit: view-curve fitting, feature sensitivity, causality and schedule analyses",
               "engagedyn"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", kVersion);

  Common common;
  auto add_common = [&](CLI::App* s, bool needs_input) {
    auto* i = s->add_option("--input", common.inputs, "Input files (CSV by header, or an ELM model JSON)");
    if (needs_input) i->required();
    s->add_option("--output", common.output, "Output directory")->required();
    s->add_option("--seed", common.seed, "Random seed")->capture_default_str();
    s->add_option("--format", common.format, "Report format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
    s->add_flag("--emit-plot-data", common.plot, "Also write two-column x,y CSV plot data");
  };

  SynthArgs synth_a;
  auto* s_synth = app.add_subcommand("synth", "Generate a synthetic scenario");
  add_common(s_synth, false);
  s_synth->add_option("--preset", synth_a.preset, "Scenario")->required()->check(CLI::IsMember(preset_names()));
  s_synth->add_option("--count", synth_a.count, "Number of videos/channels/samples (0: preset default)")
      ->check(CLI::Range(0, 1000000));

  auto add_elm = [](CLI::App* s, ElmArgs& e) {
    s->add_option("--neurons,-L", e.neurons, "Hidden neurons")->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--transfer", e.transfer, "Transfer function")
        ->check(CLI::IsMember({"sigmoid", "tanh", "gaussian"}))
        ->capture_default_str();
    s->add_option("--ridge", e.ridge, "Ridge term on H'H (0: pseudoinverse)")->check(CLI::NonNegativeNumber);
    s->add_option("--pearson-threshold", e.pearson, "Correlation elimination threshold")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    s->add_option("--horizon", e.horizon, "Days of views in the target")->check(CLI::PositiveNumber)->capture_default_str();
  };
  ElmArgs elm_a;
  auto* s_train = app.add_subcommand("train-elm", "Train an ELM view predictor with k-fold evaluation");
  add_common(s_train, true);
  add_elm(s_train, elm_a);
  s_train->add_option("--folds", elm_a.folds, "Cross-validation folds")->check(CLI::Range(2, 1000))->capture_default_str();

  SensitivityArgs sens_a;
  auto* s_sens = app.add_subcommand("sensitivity", "SSD feature sensitivity (optionally with HSIC-Lasso)");
  add_common(s_sens, true);
  add_elm(s_sens, sens_a.elm);
  s_sens->add_flag("--hsic", sens_a.with_hsic, "Add HSIC-Lasso coefficients to the report");
  s_sens->add_option("--lambda", sens_a.lambda, "HSIC-Lasso penalty")->check(CLI::NonNegativeNumber)->capture_default_str();

  auto* s_pred = app.add_subcommand("predict", "Predict log views with a trained model");
  add_common(s_pred, true);

  HsicArgs hsic_a;
  auto* s_hsic = app.add_subcommand("hsic", "HSIC-Lasso feature selection");
  add_common(s_hsic, true);
  s_hsic->add_option("--lambda", hsic_a.lambda, "Penalty")->check(CLI::NonNegativeNumber)->capture_default_str();
  s_hsic->add_option("--cap", hsic_a.cap, "Subsample cap")->check(CLI::Range(10, 100000))->capture_default_str();
  s_hsic->add_option("--horizon", hsic_a.horizon, "Days of views in the target")->check(CLI::PositiveNumber);

  granger::CausalityOptions gr_a;
  auto* s_gr = app.add_subcommand("granger", "Views-to-subscribers Granger causality per channel");
  add_common(s_gr, true);
  s_gr->add_option("--ns", gr_a.ar.n_s, "Subscriber lags")->check(CLI::Range(0, 60))->capture_default_str();
  s_gr->add_option("--nv", gr_a.ar.n_v, "View lags")->check(CLI::Range(1, 60))->capture_default_str();
  s_gr->add_option("--alpha", gr_a.alpha, "Significance level")->check(CLI::Range(1e-12, 0.5))->capture_default_str();
  s_gr->add_option("--lb-lags", gr_a.lb_lags, "Ljung-Box lags")->check(CLI::Range(1, 500))->capture_default_str();
  s_gr->add_flag("--intercept", gr_a.ar.intercept, "Fit a constant term");
  s_gr->add_flag("--difference", gr_a.ar.difference, "First-difference both series");
  s_gr->add_flag("--swap", gr_a.ar.swap, "Test subscribers -> views instead");
  s_gr->add_flag("--lb-count-exogenous", gr_a.lb_count_exogenous, "Ljung-Box dof = h - n_s - n_v");

  ScheduleArgs sch_a;
  double max_rate = -1.0;
  auto* s_sch = app.add_subcommand("schedule", "Upload-schedule periodicity and off-schedule gains");
  add_common(s_sch, true);
  s_sch->add_option("--tolerance", sch_a.tolerance, "Phase tolerance in days")->check(CLI::Range(0, 365))->capture_default_str();
  s_sch->add_option("--window", sch_a.window, "Gain window in days")->check(CLI::Range(1, 365))->capture_default_str();
  s_sch->add_option("--max-upload-rate", max_rate, "Skip channels uploading more than this per day")
      ->check(CLI::NonNegativeNumber);

  GompertzArgs gz_a;
  int kmax = -1;
  double cmax = -1.0, lambda = -1.0;
  auto* s_gz = app.add_subcommand("fit-gompertz", "Fit the multi-event Gompertz view model");
  add_common(s_gz, true);
  s_gz->add_option("--video", gz_a.videos, "Video ids to fit (default: all)");
  s_gz->add_option("--kmax", kmax, "Force the number of exogenous events")->check(CLI::Range(0, 20));
  s_gz->add_option("--c-max", cmax, "Burst slope threshold (views/day)")->check(CLI::PositiveNumber);
  s_gz->add_option("--multistart", gz_a.multistart, "Random restarts")->check(CLI::Range(0, 100))->capture_default_str();
  s_gz->add_flag("--oracle", gz_a.oracle, "Exhaustive subset search over candidate days");
  s_gz->add_option("--candidates", gz_a.candidates, "Candidate onset days for --oracle")->delimiter(',');
  s_gz->add_option("--lambda", lambda, "Oracle penalty per event")->check(CLI::NonNegativeNumber);
  s_gz->add_flag("--playlist", gz_a.playlist, "Playlist profile over the videos in --video order");

  MetaoptArgs mo_a;
  auto* s_mo = app.add_subcommand("metaopt", "Meta-data optimization view sensitivity");
  add_common(s_mo, true);
  s_mo->add_option("--kind", mo_a.kind, "Event kind")
      ->check(CLI::IsMember({"title", "thumbnail", "keyword", "no-change", "all"}))
      ->capture_default_str();
  s_mo->add_flag("--disjoint", mo_a.disjoint, "Pre-window excludes the event day");
  s_mo->add_option("--min-traffic-events", mo_a.min_traffic, "Minimum events per traffic-source median")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_mo->add_option("--exclude-category", mo_a.exclude_categories, "Extra excluded category");
  s_mo->add_option("--exclude-keyword", mo_a.exclude_keywords, "Extra excluded keyword");
  s_mo->add_flag("--no-default-exclusions", mo_a.no_default_exclusions, "Drop the built-in exclusion lists");

  try {
    app.parse(argc, argv);
    if (s_gz->parsed()) {
      if (kmax >= 0) gz_a.k_max = kmax;
      if (cmax > 0) gz_a.c_max = cmax;
      if (lambda >= 0) gz_a.lambda = lambda;
      if (!gz_a.candidates.empty() && !gz_a.oracle) throw UsageError("--candidates requires --oracle");
      if (gz_a.playlist && gz_a.oracle) throw UsageError("--playlist and --oracle are exclusive");
      if (gz_a.oracle && gz_a.k_max) throw UsageError("--kmax cannot be combined with --oracle");
    }
    if (s_sch->parsed() && max_rate >= 0) sch_a.max_upload_rate = max_rate;
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  Run r(sub->get_name(), common);
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  try {
    const std::string name = sub->get_name();
    if (name == "synth") cmd_synth(r, synth_a);
    else if (name == "train-elm") cmd_train_elm(r, elm_a);
    else if (name == "sensitivity") cmd_sensitivity(r, sens_a);
    else if (name == "predict") cmd_predict(r);
    else if (name == "hsic") cmd_hsic(r, hsic_a);
    else if (name == "granger") cmd_granger(r, gr_a);
    else if (name == "schedule") cmd_schedule(r, sch_a);
    else if (name == "fit-gompertz") cmd_fit_gompertz(r, gz_a);
    else if (name == "metaopt") cmd_metaopt(r, mo_a);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    if (e.error_class() == ErrorClass::data) return kData;
    r.manifest("failed", elapsed(), e.what());
    return kNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  if (r.numerical_failure()) {
    for (const auto& [id, msg] : r.errors()) err << "error: " << id << ": " << msg << "\n";
    r.manifest("partial", elapsed());
    return kNumerical;
  }
  r.manifest("ok", elapsed());
  for (const auto& [id, msg] : r.errors()) err << "warning: " << id << ": " << msg << "\n";
  return kOk;
}

/// Convenience overload for tests: argv without the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<const char*> argv{"engagedyn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace engagedyn::cli
