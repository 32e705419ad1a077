#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "engagedyn/data.hpp"
#include "engagedyn/numkit/linalg.hpp"
#include "engagedyn/synth.hpp"

namespace engagedyn::elm {

enum class Transfer { sigmoid, tanh, gaussian };

inline std::string_view to_string(Transfer t) {
  switch (t) {
    case Transfer::sigmoid: return "sigmoid";
    case Transfer::tanh: return "tanh";
    case Transfer::gaussian: return "gaussian";
  }
  return "?";
}

inline std::optional<Transfer> parse_transfer(std::string_view s) {
  if (s == "sigmoid") return Transfer::sigmoid;
  if (s == "tanh") return Transfer::tanh;
  if (s == "gaussian") return Transfer::gaussian;
  return std::nullopt;
}

// Neuron activation h(z) and dh/dz for pre-activation z = w.x + bias.
// The Gaussian neuron is exp(-z^2).
inline double activate(Transfer t, double z) {
  switch (t) {
    case Transfer::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Transfer::tanh: return std::tanh(z);
    case Transfer::gaussian: return std::exp(-z * z);
  }
  return 0.0;
}

inline double activate_derivative(Transfer t, double z) {
  switch (t) {
    case Transfer::sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 - s);
    }
    case Transfer::tanh: {
      const double th = std::tanh(z);
      return 1.0 - th * th;
    }
    case Transfer::gaussian: return -2.0 * z * std::exp(-z * z);
  }
  return 0.0;
}

/// Single-hidden-layer network with random fixed hidden parameters and
/// least-squares output weights: v(x) = sum_k beta_k h(w_k . x + bias_k).
struct ElmModel {
  Transfer transfer = Transfer::sigmoid;
  Matrix weights;  // L x m
  Vector bias;     // L
  Vector beta;     // L
  std::vector<std::string> feature_names;
  std::optional<MinMaxScaler> scaler;  // applied to raw features before the network
  double training_sse = 0.0;

  Eigen::Index neurons() const { return weights.rows(); }
  Eigen::Index inputs() const { return weights.cols(); }

  /// Pre-activations Z = X W' + 1 bias' for already-scaled inputs.
  Matrix preactivation(const Matrix& X) const {
    Matrix Z = X * weights.transpose();
    Z.rowwise() += bias.transpose();
    return Z;
  }

  Matrix hidden(const Matrix& X) const {
    return preactivation(X).unaryExpr([t = transfer](double z) { return activate(t, z); });
  }

  /// Predictions for rows of already-scaled inputs.
  Vector predict_scaled(const Matrix& X) const {
    if (X.cols() != inputs()) throw InvalidInput("elm: input dimension mismatch");
    return hidden(X) * beta;
  }
};

struct TrainOptions {
  int neurons = 100;
  Transfer transfer = Transfer::sigmoid;
  double ridge = 0.0;
};

/// Draws theta_k i.i.d. uniform on [-1, 1] and solves for beta: the
/// pseudoinverse solution when ridge == 0, else (H'H + ridge I)^-1 H'V.
/// Inputs are expected on [0, 1].
inline ElmModel train(const Matrix& X, const Vector& y, const TrainOptions& opt, synth::Rng& rng,
                      std::vector<std::string> names = {}) {
  if (X.cols() < 1 || X.rows() < 1) throw InvalidInput("elm::train: need at least one sample and one feature");
  if (y.size() != X.rows()) throw InvalidInput("elm::train: target length mismatch");
  if (opt.neurons < 1) throw InvalidInput("elm::train: neuron count must be >= 1");
  if (opt.ridge < 0.0) throw InvalidInput("elm::train: ridge must be >= 0");
  numkit::require_finite(X, "elm::train");

  ElmModel model;
  model.transfer = opt.transfer;
  model.weights.resize(opt.neurons, X.cols());
  model.bias.resize(opt.neurons);
  for (int k = 0; k < opt.neurons; ++k) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) model.weights(k, j) = rng.uniform(-1.0, 1.0);
    model.bias(k) = rng.uniform(-1.0, 1.0);
  }
  model.feature_names = names.empty() ? std::vector<std::string>(static_cast<std::size_t>(X.cols())) : std::move(names);

  const Matrix H = model.hidden(X);
  if (!H.allFinite()) throw NumericalError("elm::train: invalid transfer output (non-finite hidden layer)");
  if (opt.ridge > 0.0) {
    Matrix A = H.transpose() * H;
    A.diagonal().array() += opt.ridge;
    model.beta = A.ldlt().solve(H.transpose() * y);
  } else {
    model.beta = numkit::pinv(H) * y;
  }
  model.training_sse = (H * model.beta - y).squaredNorm();
  return model;
}

inline ElmModel train(const FeatureTable& t, const TrainOptions& opt, synth::Rng& rng) {
  return train(t.X, t.y, opt, rng, t.names);
}

/// Prediction for a named feature vector. Values are scaled with the model's
/// scaler when present and clipped into [0, 1]; clips are counted.
inline double predict(const ElmModel& m, const FeatureVector& x, long* clipped = nullptr) {
  Matrix row(1, m.inputs());
  for (std::size_t j = 0; j < m.feature_names.size(); ++j) {
    const auto v = x.get(m.feature_names[j]);
    if (!v) throw InvalidInput("elm::predict: missing feature '" + m.feature_names[j] + "'");
    double s = m.scaler ? m.scaler->scale(j, *v, clipped) : *v;
    if (s < 0.0 || s > 1.0) {
      if (clipped) ++*clipped;
      s = std::clamp(s, 0.0, 1.0);
    }
    row(0, static_cast<Eigen::Index>(j)) = s;
  }
  return m.predict_scaled(row)(0);
}

// ---------------------------------------------------------------------------
// Sum-of-squares-derivative sensitivity

struct SensitivityReport {
  std::vector<std::string> names;
  std::vector<double> ssd;
  std::vector<double> normalized;  // ssd / max(ssd)
  std::vector<std::size_t> rank;   // feature indices, most sensitive first
};

/// d v(x_i) / d x(k) for every sample i (rows) and feature k (cols).
inline Matrix input_gradients(const ElmModel& m, const Matrix& X) {
  const Matrix Z = m.preactivation(X);
  Matrix D = Z.unaryExpr([t = m.transfer](double z) { return activate_derivative(t, z); });
  D.array().rowwise() *= m.beta.transpose().array();
  return D * m.weights;
}

inline SensitivityReport make_report(std::vector<std::string> names, std::vector<double> ssd) {
  SensitivityReport r;
  r.names = std::move(names);
  r.ssd = std::move(ssd);
  const double mx = r.ssd.empty() ? 0.0 : *std::max_element(r.ssd.begin(), r.ssd.end());
  for (double v : r.ssd) r.normalized.push_back(mx > 0.0 ? v / mx : 0.0);
  r.rank.resize(r.ssd.size());
  std::iota(r.rank.begin(), r.rank.end(), std::size_t{0});
  std::stable_sort(r.rank.begin(), r.rank.end(), [&](std::size_t a, std::size_t b) { return r.ssd[a] > r.ssd[b]; });
  return r;
}

/// SSD_k = sum_i (dv/dx(k) at x_i)^2 with analytic neuron derivatives. Ties
/// keep registry (column) order.
inline SensitivityReport ssd_sensitivity(const ElmModel& m, const Matrix& X) {
  const Matrix G = input_gradients(m, X);
  std::vector<double> ssd(static_cast<std::size_t>(G.cols()));
  for (Eigen::Index k = 0; k < G.cols(); ++k) ssd[static_cast<std::size_t>(k)] = G.col(k).squaredNorm();
  return make_report(m.feature_names, std::move(ssd));
}

// ---------------------------------------------------------------------------
// k-fold evaluation

struct EvalReport {
  std::vector<double> fold_rmse;
  std::vector<double> fold_r2;
  double rmse = 0.0;       // mean of fold RMSEs
  double r2_pooled = 0.0;  // over all out-of-fold predictions
  std::uint64_t seed = 0;
  Vector predictions;  // out-of-fold, in sample order
};

inline double r_squared(const Vector& y, const Vector& yhat) {
  const double ss_tot = (y.array() - y.mean()).square().sum();
  const double ss_res = (y - yhat).squaredNorm();
  return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
}

/// Assigns each sample a fold index in [0, k) from a seeded shuffle.
inline std::vector<int> fold_assignment(long n, int k, synth::Rng& rng) {
  std::vector<long> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0L);
  rng.shuffle(order);
  std::vector<int> fold(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) fold[static_cast<std::size_t>(order[i])] = static_cast<int>(i % k);
  return fold;
}

/// Each fold trains on its own child stream of `rng`, so results do not depend
/// on the order folds are evaluated in.
inline EvalReport kfold_eval(const Matrix& X, const Vector& y, int k, const TrainOptions& opt, synth::Rng& rng) {
  const long n = static_cast<long>(X.rows());
  if (k < 2) throw InvalidInput("kfold_eval: k must be >= 2");
  if (n < k) throw InvalidInput("kfold_eval: invalid k, fewer samples (" + std::to_string(n) + ") than folds");
  EvalReport rep;
  rep.seed = rng.seed();
  const auto fold = fold_assignment(n, k, rng);
  rep.predictions = Vector::Zero(n);
  for (int f = 0; f < k; ++f) {
    std::vector<long> tr, te;
    for (long i = 0; i < n; ++i) (fold[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
    if (te.empty()) throw InvalidInput("kfold_eval: invalid k, fold " + std::to_string(f) + " has no test samples");
    Matrix Xtr(static_cast<Eigen::Index>(tr.size()), X.cols()), Xte(static_cast<Eigen::Index>(te.size()), X.cols());
    Vector ytr(static_cast<Eigen::Index>(tr.size())), yte(static_cast<Eigen::Index>(te.size()));
    for (std::size_t i = 0; i < tr.size(); ++i) {
      Xtr.row(i) = X.row(tr[i]);
      ytr(i) = y(tr[i]);
    }
    for (std::size_t i = 0; i < te.size(); ++i) {
      Xte.row(i) = X.row(te[i]);
      yte(i) = y(te[i]);
    }
    synth::Rng fold_rng = rng.split(static_cast<std::uint64_t>(f));
    const ElmModel model = train(Xtr, ytr, opt, fold_rng);
    const Vector pred = model.predict_scaled(Xte);
    for (std::size_t i = 0; i < te.size(); ++i) rep.predictions(te[i]) = pred(i);
    rep.fold_rmse.push_back(std::sqrt((pred - yte).squaredNorm() / static_cast<double>(te.size())));
    rep.fold_r2.push_back(r_squared(yte, pred));
  }
  rep.rmse = std::accumulate(rep.fold_rmse.begin(), rep.fold_rmse.end(), 0.0) / k;
  rep.r2_pooled = r_squared(y, rep.predictions);
  return rep;
}

}  // namespace engagedyn::elm
