#include <gtest/gtest.h>

#include <cmath>

#include "engagedyn/elm.hpp"
#include "engagedyn/presets.hpp"
#include "engagedyn/report.hpp"

using namespace engagedyn;

namespace {

elm::ElmModel trained(std::uint64_t seed, elm::Transfer tr = elm::Transfer::sigmoid, int n = 300, int L = 40) {
  synth::Rng rng(seed);
  const FeatureTable t = presets::feature_set(n, rng, 6);
  synth::Rng tr_rng = rng.split(1);
  return elm::train(t, {L, tr, 0.0}, tr_rng);
}

Matrix fd_gradients(const elm::ElmModel& m, const Matrix& X, double h) {
  Matrix G(X.rows(), X.cols());
  for (Eigen::Index k = 0; k < X.cols(); ++k) {
    Matrix up = X, dn = X;
    up.col(k).array() += h;
    dn.col(k).array() -= h;
    G.col(k) = (m.predict_scaled(up) - m.predict_scaled(dn)) / (2 * h);
  }
  return G;
}

}  // namespace

TEST(Elm, TransferDerivatives) {
  for (auto t : {elm::Transfer::sigmoid, elm::Transfer::tanh, elm::Transfer::gaussian})
    for (double z : {-3.0, -0.4, 0.0, 0.7, 2.5}) {
      const double h = 1e-6;
      const double fd = (elm::activate(t, z + h) - elm::activate(t, z - h)) / (2 * h);
      EXPECT_NEAR(elm::activate_derivative(t, z), fd, 1e-8);
    }
  EXPECT_EQ(elm::parse_transfer("tanh"), elm::Transfer::tanh);
  EXPECT_FALSE(elm::parse_transfer("relu"));
}

class ElmGradient : public ::testing::TestWithParam<int> {};

TEST_P(ElmGradient, AnalyticMatchesCentralDifference) {
  const auto tr = static_cast<elm::Transfer>(GetParam());
  const elm::ElmModel m = trained(3, tr);
  synth::Rng rng(99);
  Matrix X(50, m.inputs());
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform();
  const Matrix G = elm::input_gradients(m, X);
  const Matrix F = fd_gradients(m, X, 1e-5);
  EXPECT_LE((G - F).cwiseAbs().maxCoeff(), 1e-4);

  const auto s = elm::ssd_sensitivity(m, X);
  for (Eigen::Index k = 0; k < X.cols(); ++k) {
    const double fd_ssd = F.col(k).squaredNorm();
    EXPECT_NEAR(s.ssd[k], fd_ssd, 1e-4 * std::max(1.0, fd_ssd));
  }
}

INSTANTIATE_TEST_SUITE_P(Transfers, ElmGradient, ::testing::Values(0, 1, 2));

TEST(Elm, SensitivityScalesWithTarget) {
  synth::Rng rng(4);
  const FeatureTable t = presets::feature_set(200, rng, 5);
  for (double c : {0.1, 3.0, -2.0}) {
    synth::Rng r1(7), r2(7);
    const elm::ElmModel a = elm::train(t.X, t.y, {30}, r1);
    const elm::ElmModel b = elm::train(t.X, c * t.y, {30}, r2);
    EXPECT_LE((b.beta - c * a.beta).cwiseAbs().maxCoeff(), 1e-8 * (1 + a.beta.cwiseAbs().maxCoeff() * std::abs(c)));
    const auto sa = elm::ssd_sensitivity(a, t.X);
    const auto sb = elm::ssd_sensitivity(b, t.X);
    for (std::size_t k = 0; k < sa.ssd.size(); ++k) {
      EXPECT_NEAR(sb.ssd[k], c * c * sa.ssd[k], 1e-6 * c * c * sa.ssd[k] + 1e-12);
      EXPECT_NEAR(sb.normalized[k], sa.normalized[k], 1e-6);
    }
    EXPECT_EQ(sa.rank, sb.rank);
  }
}

TEST(Elm, FeatureWithZeroWeightsHasZeroSensitivity) {
  elm::ElmModel m = trained(5);
  m.weights.col(2).setZero();
  synth::Rng rng(1);
  Matrix X(40, m.inputs());
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform();
  const auto s = elm::ssd_sensitivity(m, X);
  EXPECT_EQ(s.ssd[2], 0.0);
  EXPECT_EQ(s.rank.back(), 2u);
  EXPECT_EQ(*std::max_element(s.normalized.begin(), s.normalized.end()), 1.0);
}

TEST(Elm, RankTiesKeepColumnOrder) {
  const auto r = elm::make_report({"a", "b", "c", "d"}, {1.0, 2.0, 1.0, 2.0});
  EXPECT_EQ(r.rank, (std::vector<std::size_t>{1, 3, 0, 2}));
  const auto z = elm::make_report({"a", "b"}, {0.0, 0.0});
  EXPECT_EQ(z.normalized, (std::vector<double>{0.0, 0.0}));
}

TEST(Elm, SameSeedSameModel) {
  const elm::ElmModel a = trained(8), b = trained(8), c = trained(9);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.beta, b.beta);
  EXPECT_NE(a.weights, c.weights);
}

TEST(Elm, TinyRidgeAgreesWithPseudoinverse) {
  synth::Rng rng(12);
  const FeatureTable t = presets::feature_set(200, rng, 4);
  synth::Rng r1(3), r2(3);
  const elm::ElmModel a = elm::train(t.X, t.y, {8, elm::Transfer::sigmoid, 0.0}, r1);
  const elm::ElmModel b = elm::train(t.X, t.y, {8, elm::Transfer::sigmoid, 1e-12}, r2);
  EXPECT_LE((a.predict_scaled(t.X) - b.predict_scaled(t.X)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_THROW(elm::train(t.X, t.y, {8, elm::Transfer::sigmoid, -1.0}, r1), InvalidInput);
}

TEST(Elm, PseudoinverseIsLeastSquares) {
  // Residual orthogonal to the hidden layer: H'(H beta - y) = 0.
  synth::Rng rng(2);
  const FeatureTable t = presets::feature_set(150, rng, 5);
  synth::Rng r(4);
  const elm::ElmModel m = elm::train(t.X, t.y, {20}, r);
  const Matrix H = m.hidden(t.X);
  EXPECT_LE((H.transpose() * (H * m.beta - t.y)).cwiseAbs().maxCoeff(), 1e-8 * t.X.rows());
  EXPECT_NEAR(m.training_sse, (H * m.beta - t.y).squaredNorm(), 1e-9);
}

TEST(Elm, KfoldRecoversSmoothTarget) {
  synth::Rng rng(6);
  Matrix X(300, 2);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform();
  const Vector y = (0.3 + X.col(0).array() - 0.5 * X.col(1).array()).matrix();
  synth::Rng cv(1);
  const elm::EvalReport ev = elm::kfold_eval(X, y, 5, {30}, cv);
  EXPECT_EQ(ev.fold_rmse.size(), 5u);
  EXPECT_GT(ev.r2_pooled, 0.9999);
  EXPECT_LT(ev.rmse, 1e-2);
  EXPECT_EQ(ev.predictions.size(), 300);
}

TEST(Elm, KfoldArgumentChecks) {
  Matrix X = Matrix::Zero(3, 1);
  Vector y = Vector::Zero(3);
  synth::Rng rng(1);
  EXPECT_THROW(elm::kfold_eval(X, y, 1, {}, rng), InvalidInput);
  EXPECT_THROW(elm::kfold_eval(X, y, 5, {}, rng), InvalidInput);
}

TEST(Elm, FoldsPartitionSamples) {
  synth::Rng rng(3);
  const auto f = elm::fold_assignment(103, 10, rng);
  std::vector<int> count(10, 0);
  for (int x : f) ++count[x];
  for (int c : count) {
    EXPECT_GE(c, 10);
    EXPECT_LE(c, 11);
  }
}

TEST(Elm, PredictScalesAndClips) {
  synth::Rng rng(2);
  FeatureTable t = presets::feature_set(100, rng, 3);
  t.X *= 10.0;
  const ScaleResult s = scale_features(t);
  synth::Rng r(1);
  elm::ElmModel m = elm::train(s.scaled, {10}, r);
  m.scaler = s.scaler;
  FeatureVector fv{t.names, {t.X(4, 0), t.X(4, 1), t.X(4, 2)}};
  EXPECT_NEAR(elm::predict(m, fv), m.predict_scaled(s.scaled.X.row(4))(0), 1e-12);
  long clipped = 0;
  FeatureVector out{t.names, {-50.0, t.X(4, 1), 99.0}};
  elm::predict(m, out, &clipped);
  EXPECT_EQ(clipped, 2);
  FeatureVector missing{{"x01"}, {0.5}};
  EXPECT_THROW(elm::predict(m, missing), InvalidInput);
}

TEST(Elm, ModelJsonRoundTrip) {
  synth::Rng rng(2);
  const FeatureTable t = presets::feature_set(100, rng, 3);
  const ScaleResult s = scale_features(t);
  synth::Rng r(5);
  elm::ElmModel m = elm::train(s.scaled, {12, elm::Transfer::tanh}, r);
  m.scaler = s.scaler;
  const std::string text = report::model_to_json(m).dump();
  const elm::ElmModel back = report::model_from_json(report::Json::parse(text));
  EXPECT_EQ(back.transfer, m.transfer);
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.bias, m.bias);
  EXPECT_EQ(back.beta, m.beta);
  EXPECT_EQ(back.feature_names, m.feature_names);
  ASSERT_TRUE(back.scaler);
  EXPECT_EQ(back.scaler->min, m.scaler->min);
  EXPECT_EQ(back.predict_scaled(s.scaled.X), m.predict_scaled(s.scaled.X));

  report::Json bad = report::model_to_json(m);
  bad["beta"].erase(0);
  EXPECT_THROW(report::model_from_json(bad), InvalidInput);
  bad = report::model_to_json(m);
  bad["transfer"] = "relu";
  EXPECT_THROW(report::model_from_json(bad), InvalidInput);
}
