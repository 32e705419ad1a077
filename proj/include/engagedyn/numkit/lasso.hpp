#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "engagedyn/numkit/linalg.hpp"

namespace engagedyn::numkit {

struct LassoOptions {
  bool nonneg = false;
  /// Rescale columns to unit norm before solving; coefficients are mapped back.
  bool standardize = false;
  double tol = 1e-8;
  int max_sweeps = 10000;
};

namespace detail {
inline double soft_threshold(double rho, double lambda) {
  if (rho > lambda) return rho - lambda;
  if (rho < -lambda) return rho + lambda;
  return 0.0;
}
}  // namespace detail

/// Lasso in covariance form: minimizes 0.5 w'Gw - c'w + lambda |w|_1 where
/// G = X'X and c = X'y. Cyclic coordinate descent in column order.
inline Vector lasso_gram(const Matrix& gram, const Vector& xty, double lambda,
                         const LassoOptions& opt = {}) {
  const Eigen::Index p = gram.rows();
  if (gram.cols() != p || xty.size() != p) throw InvalidInput("lasso: dimension mismatch");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidInput("lasso: lambda must be >= 0");
  if (!gram.allFinite() || !xty.allFinite()) throw InvalidInput("lasso: non-finite inputs");

  Vector scale = Vector::Ones(p);
  if (opt.standardize) {
    for (Eigen::Index j = 0; j < p; ++j)
      if (gram(j, j) > 0.0) scale(j) = 1.0 / std::sqrt(gram(j, j));
  }
  const Matrix G = scale.asDiagonal() * gram * scale.asDiagonal();
  const Vector c = scale.cwiseProduct(xty);

  Vector w = Vector::Zero(p);
  // Running G*w lets each coordinate update run in O(p).
  Vector gw = Vector::Zero(p);
  for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double gjj = G(j, j);
      if (gjj <= 0.0) continue;
      const double rho = c(j) - (gw(j) - gjj * w(j));
      double next = detail::soft_threshold(rho, lambda) / gjj;
      if (opt.nonneg && next < 0.0) next = 0.0;
      const double delta = next - w(j);
      if (delta != 0.0) {
        gw += delta * G.col(j);
        w(j) = next;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    if (max_change < opt.tol) return scale.cwiseProduct(w);
  }
  throw ConvergenceError("lasso: no convergence after " + std::to_string(opt.max_sweeps) + " sweeps",
                         scale.cwiseProduct(w));
}

/// Coordinate-descent solution of 0.5 |y - Xw|^2 + lambda |w|_1, optionally w >= 0.
inline Vector lasso(const Matrix& X, const Vector& y, double lambda, const LassoOptions& opt = {}) {
  require_finite(X, "lasso");
  if (y.size() != X.rows()) throw InvalidInput("lasso: y length does not match rows of X");
  const Matrix gram = X.transpose() * X;
  const Vector xty = X.transpose() * y;
  return lasso_gram(gram, xty, lambda, opt);
}

}  // namespace engagedyn::numkit
