#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "engagedyn/data.hpp"
#include "engagedyn/numkit/lasso.hpp"
#include "engagedyn/synth.hpp"

namespace engagedyn::hsic {

struct HsicOptions {
  // Penalty on the normalized problem (see hsic_lasso); feature/output
  // inner products of independent variables are O(1) there for any n.
  double lambda = 20.0;
  std::size_t subsample_cap = 2000;
  /// Rows of the Gram matrices processed per block; bounds memory at m * block * n doubles.
  std::size_t block_rows = 64;
  numkit::LassoOptions lasso{.nonneg = true, .standardize = false, .tol = 1e-8, .max_sweeps = 10000};
};

struct HsicResult {
  std::vector<std::string> names;
  std::vector<double> alpha;      // per-feature coefficient, >= 0
  std::vector<double> bandwidth;  // per-feature Gaussian kernel width
  double output_bandwidth = 1.0;
  double lambda = 0.0;
  std::vector<std::size_t> selected;  // indices with alpha > 0
  std::size_t samples_used = 0;

  // Normalized problem in covariance form, kept for diagnostics:
  // gram(k, l) = n <Kt_k, Kt_l>_F, target(k) = n <Kt_k, Lt>_F.
  Matrix gram;
  Vector target;
};

/// Median of pairwise |x_i - x_j| over i < j; 1 when the median is 0.
inline double median_bandwidth(const Vector& x) {
  const auto n = static_cast<std::size_t>(x.size());
  std::vector<double> d;
  d.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d.push_back(std::abs(x(i) - x(j)));
  if (d.empty()) return 1.0;
  const auto mid = d.begin() + static_cast<long>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  double med = *mid;
  if (d.size() % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), mid));
  return med > 0.0 ? med : 1.0;
}

inline double gaussian_kernel(double a, double b, double width) {
  const double d = (a - b) / width;
  return std::exp(-0.5 * d * d);
}

/// Gaussian Gram matrix of one variable, centered as Gamma K Gamma with Gamma = I - 11'/n.
inline Matrix centered_gram(const Vector& x, double width) {
  const Eigen::Index n = x.size();
  Matrix K(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) K(i, j) = gaussian_kernel(x(i), x(j), width);
  const Vector mean = K.rowwise().mean();
  const double grand = mean.mean();
  K.rowwise() -= mean.transpose();
  K.colwise() -= mean;
  K.array() += grand;
  return K;
}

namespace detail {

// Streams the centered Grams of all features and the output in row blocks and
// accumulates the Frobenius inner products needed by the lasso.
inline void accumulate_products(const Matrix& X, const Vector& y, const std::vector<double>& widths,
                                double out_width, std::size_t block_rows, Matrix& gram, Vector& target,
                                double& out_sq) {
  const Eigen::Index n = X.rows(), m = X.cols();
  // Row means of each uncentered Gram (symmetric, so also column means).
  Matrix row_mean(n, m);
  Vector grand(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) s += gaussian_kernel(X(i, k), X(j, k), widths[static_cast<std::size_t>(k)]);
      row_mean(i, k) = s / static_cast<double>(n);
    }
    grand(k) = row_mean.col(k).mean();
  }
  Vector out_mean(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) s += gaussian_kernel(y(i), y(j), out_width);
    out_mean(i) = s / static_cast<double>(n);
  }
  const double out_grand = out_mean.mean();

  gram = Matrix::Zero(m, m);
  target = Vector::Zero(m);
  out_sq = 0.0;
  const auto br = static_cast<Eigen::Index>(std::max<std::size_t>(1, block_rows));
  Matrix block(m, br * n);
  Vector out_block(br * n);
  for (Eigen::Index r0 = 0; r0 < n; r0 += br) {
    const Eigen::Index rows = std::min(br, n - r0);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::Index i = r0 + r;
      for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index col = r * n + j;
        for (Eigen::Index k = 0; k < m; ++k)
          block(k, col) = gaussian_kernel(X(i, k), X(j, k), widths[static_cast<std::size_t>(k)]) - row_mean(i, k) -
                          row_mean(j, k) + grand(k);
        out_block(col) = gaussian_kernel(y(i), y(j), out_width) - out_mean(i) - out_mean(j) + out_grand;
      }
    }
    const auto used = rows * n;
    gram.noalias() += block.leftCols(used) * block.leftCols(used).transpose();
    target.noalias() += block.leftCols(used) * out_block.head(used);
    out_sq += out_block.head(used).squaredNorm();
  }
}

}  // namespace detail

/// HSIC-Lasso: min_alpha (n/2) |Lt - sum_k alpha_k Kt_k|_F^2 + lambda sum alpha_k,
/// alpha >= 0, where Kt = Kbar / |Kbar|_F are the centered Gaussian Grams
/// (median-distance width) normalized to unit Frobenius norm. Samples beyond
/// the cap are uniformly subsampled with `rng`.
inline HsicResult hsic_lasso(const Matrix& X, const Vector& y, const std::vector<std::string>& names,
                             const HsicOptions& opt, synth::Rng& rng) {
  if (!(opt.lambda >= 0.0) || !std::isfinite(opt.lambda)) throw InvalidInput("hsic_lasso: lambda must be >= 0");
  if (X.rows() < 10) throw InvalidInput("hsic_lasso: need at least 10 samples");
  if (y.size() != X.rows()) throw InvalidInput("hsic_lasso: target length mismatch");
  numkit::require_finite(X, "hsic_lasso");

  Matrix Xs = X;
  Vector ys = y;
  if (static_cast<std::size_t>(X.rows()) > opt.subsample_cap) {
    std::vector<long> idx(static_cast<std::size_t>(X.rows()));
    std::iota(idx.begin(), idx.end(), 0L);
    rng.shuffle(idx);
    idx.resize(opt.subsample_cap);
    std::sort(idx.begin(), idx.end());
    Xs.resize(static_cast<Eigen::Index>(idx.size()), X.cols());
    ys.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      Xs.row(i) = X.row(idx[i]);
      ys(i) = y(idx[i]);
    }
  }

  HsicResult r;
  r.names = names.empty() ? std::vector<std::string>(static_cast<std::size_t>(X.cols())) : names;
  r.lambda = opt.lambda;
  r.samples_used = static_cast<std::size_t>(Xs.rows());
  for (Eigen::Index k = 0; k < Xs.cols(); ++k) r.bandwidth.push_back(median_bandwidth(Xs.col(k)));
  r.output_bandwidth = median_bandwidth(ys);

  double out_sq = 0.0;
  detail::accumulate_products(Xs, ys, r.bandwidth, r.output_bandwidth, opt.block_rows, r.gram, r.target, out_sq);
  const double n = static_cast<double>(Xs.rows());
  const Vector norm = r.gram.diagonal().cwiseMax(0.0).cwiseSqrt();
  const double out_norm = std::sqrt(out_sq);
  for (Eigen::Index k = 0; k < r.gram.rows(); ++k) {
    // A constant feature has a zero Gram; it cannot be selected.
    if (!(norm(k) > 0.0)) {
      r.gram.row(k).setZero();
      r.gram.col(k).setZero();
      r.gram(k, k) = n;
      r.target(k) = 0.0;
      continue;
    }
    r.target(k) = out_norm > 0.0 ? n * r.target(k) / (norm(k) * out_norm) : 0.0;
  }
  for (Eigen::Index k = 0; k < r.gram.rows(); ++k)
    for (Eigen::Index l = 0; l < r.gram.cols(); ++l)
      if (norm(k) > 0.0 && norm(l) > 0.0) r.gram(k, l) = n * r.gram(k, l) / (norm(k) * norm(l));
  const Vector alpha = numkit::lasso_gram(r.gram, r.target, opt.lambda, opt.lasso);
  for (Eigen::Index k = 0; k < alpha.size(); ++k) {
    r.alpha.push_back(alpha(k));
    if (alpha(k) > 0.0) r.selected.push_back(static_cast<std::size_t>(k));
  }
  return r;
}

inline HsicResult hsic_lasso(const FeatureTable& t, const HsicOptions& opt, synth::Rng& rng) {
  return hsic_lasso(t.X, t.y, t.names, opt, rng);
}

}  // namespace engagedyn::hsic
