#pragma once

// JSON documents for models and analysis reports. Key order is fixed by
// construction (ordered_json) so identical results serialize identically.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "engagedyn/elm.hpp"
#include "engagedyn/gompertz.hpp"
#include "engagedyn/granger.hpp"
#include "engagedyn/hsic.hpp"
#include "engagedyn/metaopt.hpp"
#include "engagedyn/schedule.hpp"

namespace engagedyn::report {

using Json = nlohmann::ordered_json;

inline constexpr int kModelVersion = 1;

template <class T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

inline Json vec(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

// ---------------------------------------------------------------------------
// ELM model

inline Json model_to_json(const elm::ElmModel& m) {
  Json theta = Json::object();
  Json weights = Json::array();
  for (Eigen::Index k = 0; k < m.weights.rows(); ++k) {
    const Vector row = m.weights.row(k).transpose();
    weights.push_back(vec(row));
  }
  theta["weights"] = std::move(weights);
  theta["bias"] = vec(m.bias);
  Json j;
  j["version"] = kModelVersion;
  j["transfer"] = std::string(elm::to_string(m.transfer));
  j["L"] = m.neurons();
  j["theta"] = std::move(theta);
  j["beta"] = vec(m.beta);
  j["feature_names"] = m.feature_names;
  if (m.scaler) {
    j["scaler"] = Json{{"min", m.scaler->min}, {"max", m.scaler->max}};
  } else {
    j["scaler"] = nullptr;
  }
  return j;
}

inline elm::ElmModel model_from_json(const Json& j, const std::string& where = "model") {
  auto fail = [&](const std::string& msg) { return InvalidInput(where + ": " + msg); };
  try {
    if (!j.is_object()) throw fail("expected a JSON object");
    if (j.at("version").get<int>() != kModelVersion)
      throw fail("unsupported model version " + j.at("version").dump());
    elm::ElmModel m;
    const auto t = elm::parse_transfer(j.at("transfer").get<std::string>());
    if (!t) throw fail("unknown transfer '" + j.at("transfer").get<std::string>() + "'");
    m.transfer = *t;
    const long L = j.at("L").get<long>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    const auto inputs = static_cast<Eigen::Index>(m.feature_names.size());
    const auto& w = j.at("theta").at("weights");
    if (L < 1 || static_cast<long>(w.size()) != L) throw fail("theta.weights must have L rows");
    m.weights.resize(L, inputs);
    for (long k = 0; k < L; ++k) {
      const auto row = w.at(static_cast<std::size_t>(k)).get<std::vector<double>>();
      if (static_cast<Eigen::Index>(row.size()) != inputs) throw fail("theta.weights row length != feature count");
      for (Eigen::Index c = 0; c < inputs; ++c) m.weights(k, c) = row[static_cast<std::size_t>(c)];
    }
    const auto bias = j.at("theta").at("bias").get<std::vector<double>>();
    const auto beta = j.at("beta").get<std::vector<double>>();
    if (static_cast<long>(bias.size()) != L || static_cast<long>(beta.size()) != L)
      throw fail("theta.bias and beta must have length L");
    m.bias = Eigen::Map<const Vector>(bias.data(), L);
    m.beta = Eigen::Map<const Vector>(beta.data(), L);
    if (!j.at("scaler").is_null()) {
      MinMaxScaler s;
      s.names = m.feature_names;
      s.min = j.at("scaler").at("min").get<std::vector<double>>();
      s.max = j.at("scaler").at("max").get<std::vector<double>>();
      if (s.min.size() != m.feature_names.size() || s.max.size() != m.feature_names.size())
        throw fail("scaler length != feature count");
      m.scaler = std::move(s);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("malformed model document (") + e.what() + ")");
  }
}

// ---------------------------------------------------------------------------
// Analyses

inline Json to_json(const elm::SensitivityReport& r) {
  Json feats = Json::array();
  for (std::size_t pos = 0; pos < r.rank.size(); ++pos) {
    const std::size_t k = r.rank[pos];
    feats.push_back(Json{{"name", r.names[k]}, {"ssd", r.ssd[k]}, {"normalized", r.normalized[k]},
                         {"rank", static_cast<long>(pos + 1)}});
  }
  return feats;
}

inline Json to_json(const elm::EvalReport& r) {
  return Json{{"folds", static_cast<long>(r.fold_rmse.size())},
              {"rmse", r.rmse},
              {"r2_pooled", r.r2_pooled},
              {"fold_rmse", r.fold_rmse},
              {"fold_r2", r.fold_r2}};
}

inline Json to_json(const hsic::HsicResult& r) {
  Json feats = Json::array();
  for (std::size_t k = 0; k < r.alpha.size(); ++k)
    feats.push_back(Json{{"name", r.names[k]}, {"alpha", r.alpha[k]}, {"bandwidth", r.bandwidth[k]}});
  std::vector<std::string> selected;
  for (std::size_t k : r.selected) selected.push_back(r.names[k]);
  return Json{{"lambda", r.lambda},
              {"samples_used", static_cast<long>(r.samples_used)},
              {"output_bandwidth", r.output_bandwidth},
              {"selected", selected},
              {"features", std::move(feats)}};
}

inline Json to_json(const granger::GrangerReport& r) {
  return Json{{"channel_id", r.channel_id},
              {"category", r.category},
              {"n_s", r.n_s},
              {"n_v", r.n_v},
              {"a", r.a},
              {"b", r.b},
              {"ljung_box", Json{{"Q", r.ljung_box.Q}, {"h", r.ljung_box.h}, {"dof", r.ljung_box.dof}, {"p", r.ljung_box.p}}},
              {"wald", Json{{"W", r.wald.W}, {"dof", r.wald.dof}, {"p", r.wald.p}}},
              {"adequacy_pass", r.adequacy_pass},
              {"causality", opt(r.causality)}};
}

inline Json to_json(const granger::CohortSummary& c) {
  Json rows = Json::array();
  for (const auto& r : c.rows)
    rows.push_back(Json{{"category", r.category},
                        {"n_channels", r.n_channels},
                        {"n_adequate", r.n_adequate},
                        {"n_causal", r.n_causal},
                        {"fraction_causal", opt(r.fraction)}});
  return Json{{"categories", std::move(rows)}, {"notes", c.notes}};
}

inline Json to_json(const schedule::ScheduleReport& r) {
  Json skipped = Json::array();
  for (const auto& s : r.gains.skipped) skipped.push_back(Json{{"day", s.day}, {"reason", s.reason}});
  return Json{{"channel_id", r.channel_id},
              {"dominant_period", opt(r.dominant_period)},
              {"peak_ratio", r.peak_ratio},
              {"events", r.events},
              {"fraction_views_gain", opt(r.gains.fraction_views_gain)},
              {"fraction_comments_gain", opt(r.gains.fraction_comments_gain)},
              {"views_gain", r.gains.views_gain},
              {"comments_gain", r.gains.comments_gain},
              {"skipped_events", std::move(skipped)}};
}

inline Json components_json(const gompertz::Params& p) {
  Json comps = Json::array();
  for (const auto& c : p.components)
    comps.push_back(Json{{"t", c.onset}, {"M", c.M}, {"eta", c.eta}, {"b", c.b}, {"c", c.c}});
  return comps;
}

inline Json to_json(const gompertz::GompertzFit& f, const std::string& video_id, const std::string& decomposition_path) {
  return Json{{"video_id", video_id},
              {"k_max", f.k_max},
              {"converged", f.converged},
              {"stop_reason", f.stop_reason},
              {"components", components_json(f.params)},
              {"sse", f.sse},
              {"c_max", f.c_max},
              {"candidates", f.candidates},
              {"decomposition_csv_path", decomposition_path}};
}

inline Json to_json(const gompertz::OracleResult& o) {
  Json subsets = Json::array();
  for (const auto& s : o.subsets) subsets.push_back(Json{{"days", s.days}, {"sse", s.sse}, {"objective", s.objective}});
  return Json{{"lambda", o.lambda}, {"objective", o.objective}, {"selected", o.selected}, {"subsets", std::move(subsets)}};
}

inline Json to_json(const gompertz::PlaylistProfile& p) {
  Json videos = Json::array();
  for (const auto& e : p.videos)
    videos.push_back(Json{{"index", static_cast<long>(e.index)},
                          {"video_id", e.id},
                          {"ok", e.ok},
                          {"error", e.ok ? Json(nullptr) : Json(e.error)},
                          {"virality", e.virality},
                          {"migration", e.migration},
                          {"early_views", e.early_views},
                          {"sse", e.sse}});
  return Json{{"videos", std::move(videos)},
              {"correlation_status", std::string(gompertz::to_string(p.status))},
              {"spearman", opt(p.spearman)}};
}

inline Json to_json(const metaopt::CohortFraction& c, const std::optional<metaopt::TrafficReport>& traffic) {
  Json per_source = Json::object();
  for (auto src : {TrafficSource::related, TrafficSource::promoted, TrafficSource::search}) {
    Json entry{{"median_ratio", "NA"}, {"n", 0}};
    if (traffic)
      for (const auto& s : traffic->sources)
        if (s.source == src) entry = Json{{"median_ratio", s.median_ratio ? Json(*s.median_ratio) : Json("NA")}, {"n", s.n}};
    per_source[std::string(to_string(src))] = std::move(entry);
  }
  Json reasons = Json::object();
  for (const auto& [k, n] : c.invalid_reasons) reasons[k] = n;
  return Json{{"kind", std::string(metaopt::to_string(c.kind))},
              {"n_events", c.n_events},
              {"n_valid", c.n_valid},
              {"n_gain", c.n_gain},
              {"fraction_gain", c.fraction_gain},
              {"n_excluded_videos", c.n_excluded_videos},
              {"n_too_short", c.n_too_short},
              {"invalid_reasons", std::move(reasons)},
              {"traffic_events", traffic ? Json(traffic->n_events) : Json(nullptr)},
              {"per_source", std::move(per_source)}};
}

}  // namespace engagedyn::report
