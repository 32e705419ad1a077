#include <gtest/gtest.h>

#include <cstdlib>
#include <map>
#include <sstream>

#include "engagedyn/cli.hpp"
#include "support.hpp"

using namespace testing_support;
namespace fs = std::filesystem;
namespace csv = engagedyn::csv;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = engagedyn::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

void expect_valid(const fs::path& file, const std::string& schema) {
  ASSERT_TRUE(fs::exists(file)) << file;
  const auto errors = validate(load(file), load_schema(schema));
  for (const auto& e : errors) ADD_FAILURE() << file.filename() << e;
}

// Every regular file under dir -> contents; manifest wall_time removed.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string body = slurp(e.path());
    if (e.path().filename() == "manifest.json") {
      json m = json::parse(body);
      m.erase("wall_time");
      json outs = json::array();
      for (const auto& o : m["outputs"]) outs.push_back(fs::path(o.get<std::string>()).filename().string());
      m["outputs"] = outs;
      json ins = json::array();
      for (const auto& o : m["inputs"]) ins.push_back(fs::path(o.get<std::string>()).filename().string());
      m["inputs"] = ins;
      body = m.dump();
    }
    files[fs::relative(e.path(), dir).string()] = body;
  }
  return files;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    auto synth = [](const std::string& preset, const std::string& out, std::vector<std::string> extra = {}) {
      std::vector<std::string> a = {"synth", "--preset", preset, "--seed", "5", "--output", dir_->str(out)};
      a.insert(a.end(), extra.begin(), extra.end());
      const Result r = cli(a);
      ASSERT_EQ(r.code, 0) << r.err;
    };
    synth("features", "feat", {"--count", "300"});
    synth("paper-fig-exo", "d41");
    synth("two-event", "two");
    synth("playlist", "pl");
    synth("causal-channel", "cc", {"--count", "4"});
    synth("weekly-schedule", "wk", {"--count", "3"});
    write_metaopt(dir_->path() / "mo");
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static void write_metaopt(const fs::path& d) {
    fs::create_directories(d);
    std::string videos = "video_id,channel_id,upload_date,category,keywords\n";
    std::string views = "video_id,day_index,views\n";
    std::string traffic = "video_id,day_index,source,views\n";
    std::string events = "video_id,day_index,kind\n";
    for (int i = 0; i < 8; ++i) {
      const std::string id = "v" + std::to_string(i);
      videos += id + ",c1,2020-01-01," + (i == 7 ? "politics" : "music") + ",pop\n";
      for (int t = 0; t < 120; ++t) {
        const int v = 100 + (t >= 15 && i % 2 == 0 ? 50 : 0);
        views += id + "," + std::to_string(t) + "," + std::to_string(v) + "\n";
        traffic += id + "," + std::to_string(t) + ",related," + std::to_string(v / 2) + "\n";
      }
      if (i < 6) events += id + ",15," + (i % 3 == 0 ? "title" : i % 3 == 1 ? "thumbnail" : "keyword") + "\n";
    }
    spit(d / "videos.csv", videos);
    spit(d / "views.csv", views);
    spit(d / "traffic.csv", traffic);
    spit(d / "events.csv", events);
  }

  static std::string in(const std::string& rel) { return dir_->str(rel); }
  static std::string out(const std::string& name) { return dir_->str("out/" + name); }

  static TempDir* dir_;
};

TempDir* Cli::dir_ = nullptr;

}  // namespace

TEST_F(Cli, SynthOutputsAndTruth) {
  expect_valid(in("d41/truth.json"), "synth_truth.schema.json");
  expect_valid(in("d41/manifest.json"), "manifest.schema.json");
  const json m = load(in("d41/manifest.json"));
  EXPECT_EQ(m["command"], "synth");
  EXPECT_EQ(m["status"], "ok");
  EXPECT_EQ(m["seed"], 5);
  const auto t = csv::read(in("d41/views.csv"));
  EXPECT_EQ(t.header, (std::vector<std::string>{"video_id", "day_index", "views"}));
  EXPECT_EQ(t.rows.size(), 120u);
}

TEST_F(Cli, FitGompertzDay41EndToEnd) {
  const Result r = cli({"fit-gompertz", "--input", in("d41/views.csv"), "--output", out("d41"), "--seed", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  fs::path fit;
  for (const auto& e : fs::directory_iterator(out("d41")))
    if (e.path().filename().string().rfind("fit_", 0) == 0) fit = e.path();
  expect_valid(fit, "gompertz_fit.schema.json");
  expect_valid(out("d41") + "/manifest.json", "manifest.schema.json");
  const json j = load(fit);
  ASSERT_EQ(j["k_max"], 1);
  EXPECT_NEAR(j["components"][1]["t"].get<double>(), 41.0, 1.0);
}

TEST_F(Cli, FitGompertzOracleAndPlaylist) {
  Result r = cli({"fit-gompertz", "--input", in("two/views.csv"), "--oracle", "--output", out("oracle")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& e : fs::directory_iterator(out("oracle")))
    if (e.path().filename().string().rfind("fit_", 0) == 0) {
      expect_valid(e.path(), "gompertz_fit.schema.json");
      EXPECT_TRUE(load(e.path()).contains("oracle"));
    }
  r = cli({"fit-gompertz", "--input", in("pl/views.csv"), "--playlist", "--output", out("pl")});
  ASSERT_EQ(r.code, 0) << r.err;
  expect_valid(out("pl") + "/playlist.json", "playlist.schema.json");
}

TEST_F(Cli, ElmTrainSensitivityPredictHsic) {
  const std::string v = in("feat/videos.csv"), w = in("feat/views.csv");
  Result r = cli({"train-elm", "--input", v, w, "--output", out("elm"), "--folds", "4", "--neurons", "40"});
  ASSERT_EQ(r.code, 0) << r.err;
  expect_valid(out("elm") + "/model.json", "elm_model.schema.json");
  expect_valid(out("elm") + "/train_report.json", "train_report.schema.json");
  EXPECT_GT(load(out("elm") + "/train_report.json")["cv"]["r2_pooled"].get<double>(), 0.8);

  r = cli({"sensitivity", "--input", out("elm") + "/model.json", v, w, "--output", out("sens")});
  ASSERT_EQ(r.code, 0) << r.err;
  expect_valid(out("sens") + "/sensitivity.json", "sensitivity.schema.json");

  r = cli({"sensitivity", "--input", v, w, "--output", out("sens2"), "--hsic", "--neurons", "40"});
  ASSERT_EQ(r.code, 0) << r.err;
  expect_valid(out("sens2") + "/sensitivity.json", "sensitivity.schema.json");

  r = cli({"predict", "--input", out("elm") + "/model.json", v, "--output", out("pred")});
  ASSERT_EQ(r.code, 0) << r.err;
  expect_valid(out("pred") + "/predictions.json", "predictions.schema.json");

  r = cli({"hsic", "--input", v, w, "--output", out("hsic")});
  ASSERT_EQ(r.code, 0) << r.err;
  expect_valid(out("hsic") + "/hsic.json", "hsic.schema.json");
  const json h = load(out("hsic") + "/hsic.json");
  std::vector<std::string> sel;
  for (const auto& s : h["selected"]) sel.push_back(s.is_string() ? s.get<std::string>() : h["features"][s.get<int>()]["name"].get<std::string>());
  EXPECT_EQ(sel, (std::vector<std::string>{"x01", "x02", "x03"}));
}

TEST_F(Cli, GrangerAndSchedule) {
  Result r = cli({"granger", "--input", in("cc/channels.csv"), in("cc/videos.csv"), "--output", out("gr")});
  ASSERT_EQ(r.code, 0) << r.err;
  expect_valid(out("gr") + "/granger.json", "granger.schema.json");
  for (const auto& c : load(out("gr") + "/granger.json")["channels"])
    if (c["adequacy_pass"].get<bool>()) {
      EXPECT_TRUE(c["causality"].get<bool>());
    }

  r = cli({"schedule", "--input", in("wk/channels.csv"), "--output", out("sc")});
  ASSERT_EQ(r.code, 0) << r.err;
  expect_valid(out("sc") + "/schedule.json", "schedule.schema.json");
  for (const auto& c : load(out("sc") + "/schedule.json")["channels"]) EXPECT_EQ(c["dominant_period"], 7);
}

TEST_F(Cli, Metaopt) {
  const std::string d = in("mo");
  Result r = cli({"metaopt", "--input", d + "/videos.csv", d + "/views.csv", d + "/events.csv", d + "/traffic.csv",
                  "--output", out("mo"), "--min-traffic-events", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  expect_valid(out("mo") + "/metaopt.json", "metaopt.schema.json");
  const json j = load(out("mo") + "/metaopt.json");
  EXPECT_EQ(j["n_valid"], 6);
  EXPECT_EQ(j["n_gain"], 3);
  EXPECT_EQ(j["n_excluded_videos"], 1);
  EXPECT_TRUE(fs::exists(out("mo") + "/metaopt_events.csv"));

  r = cli({"metaopt", "--input", d + "/videos.csv", d + "/views.csv", d + "/events.csv", "--kind", "no-change",
           "--output", out("mo_nc")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load(out("mo_nc") + "/metaopt.json")["n_events"], 1);  // v6 has no events, v7 excluded
}

TEST_F(Cli, CsvFormatAndPlotData) {
  const Result r = cli({"granger", "--input", in("cc/channels.csv"), "--output", out("grcsv"), "--format", "csv",
                        "--emit-plot-data"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out("grcsv") + "/granger.csv"));
  EXPECT_FALSE(fs::exists(out("grcsv") + "/granger.json"));
  const auto plot = csv::read(out("grcsv") + "/plot_causal_fraction.csv");
  EXPECT_EQ(plot.header, (std::vector<std::string>{"x", "y"}));
}

TEST_F(Cli, DeterministicAcrossRunsAndThreadCounts) {
  const std::vector<std::vector<std::string>> cmds = {
      {"synth", "--preset", "two-event", "--count", "2"},
      {"train-elm", "--input", in("feat/videos.csv"), in("feat/views.csv"), "--folds", "3", "--neurons", "30"},
      {"hsic", "--input", in("feat/videos.csv"), in("feat/views.csv")},
      {"granger", "--input", in("cc/channels.csv")},
      {"schedule", "--input", in("wk/channels.csv")},
      {"fit-gompertz", "--input", in("two/views.csv"), "--multistart", "3"},
      {"metaopt", "--input", in("mo/videos.csv"), in("mo/views.csv"), in("mo/events.csv")},
  };
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    std::vector<std::map<std::string, std::string>> snaps;
    for (const char* threads : {"1", "3"}) {
      setenv("ENGAGEDYN_THREADS", threads, 1);
      const std::string o = out("det" + std::to_string(i) + "_" + threads);
      auto a = cmds[i];
      a.insert(a.end(), {"--seed", "9", "--output", o, "--emit-plot-data"});
      const Result r = cli(a);
      ASSERT_EQ(r.code, 0) << cmds[i][0] << ": " << r.err;
      snaps.push_back(snapshot(o));
    }
    unsetenv("ENGAGEDYN_THREADS");
    EXPECT_EQ(snaps[0], snaps[1]) << cmds[i][0];
  }
}

TEST_F(Cli, MissingInputExitsTwoAndNamesPath) {
  const std::string missing = in("nope/views.csv");
  const Result r = cli({"fit-gompertz", "--input", missing, "--output", out("missing")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(missing), std::string::npos) << r.err;
}

TEST_F(Cli, UsageErrorsExitOneWithoutArtifacts) {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {"fit-gompertz", "--input", in("d41/views.csv"), "--output", out("u1"), "--bogus"},
           {"fit-gompertz", "--input", in("d41/views.csv"), "--output", out("u2"), "--candidates", "5"},
           {"fit-gompertz", "--input", in("d41/views.csv"), "--output", out("u3"), "--oracle", "--playlist"},
           {"synth", "--preset", "nope", "--output", out("u4")},
           {"granger", "--input", in("cc/channels.csv"), "--output", out("u5"), "--alpha", "abc"},
           {"frobnicate"},
           {}}) {
    const Result r = cli(args);
    EXPECT_EQ(r.code, 1) << (args.empty() ? "" : args[0]) << r.err;
  }
  for (const char* d : {"u1", "u2", "u3", "u4", "u5"}) EXPECT_FALSE(fs::exists(out(d))) << d;
}

TEST_F(Cli, SchemaErrorExitsTwo) {
  const fs::path bad = dir_->path() / "bad_views.csv";
  spit(bad, "video_id,day_index,views\nv1,0,1\nv1,0,2\n");
  const Result r = cli({"fit-gompertz", "--input", bad.string(), "--output", out("bad")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad_views.csv:3"), std::string::npos) << r.err;
}

TEST_F(Cli, PerItemErrorsRecordedInManifest) {
  // One good series and one too short to fit.
  const fs::path views = dir_->path() / "mixed_views.csv";
  std::string body = slurp(in("d41/views.csv"));
  for (int t = 0; t < 5; ++t) body += "short," + std::to_string(t) + ",3\n";
  spit(views, body);
  const Result r = cli({"fit-gompertz", "--input", views.string(), "--output", out("mixed")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json m = load(out("mixed") + "/manifest.json");
  ASSERT_EQ(m["item_errors"].size(), 1u);
  EXPECT_EQ(m["item_errors"][0]["id"], "short");
}

TEST_F(Cli, VersionAndHelp) {
  Result r = cli({"--version"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find(engagedyn::cli::kVersion), std::string::npos);
  r = cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("fit-gompertz"), std::string::npos);
}

TEST(CliBinary, ExitCodesThroughProcess) {
  TempDir d("clibin");
  const std::string bin = ENGAGEDYN_CLI_PATH;
  const std::string quiet = " >/dev/null 2>&1";
  auto status = [&](const std::string& args) {
    const int s = std::system((bin + " " + args + quiet).c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(status("synth --preset day41-event --output " + d.str("s")), 0);
  EXPECT_EQ(status("fit-gompertz --input " + d.str("none.csv") + " --output " + d.str("o")), 2);
  EXPECT_EQ(status("--no-such-flag"), 1);
}
