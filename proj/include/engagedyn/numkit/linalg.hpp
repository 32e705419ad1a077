#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "engagedyn/error.hpp"

namespace engagedyn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace numkit {

inline void require_finite(const Matrix& m, const char* what) {
  if (m.size() == 0) throw InvalidInput(std::string(what) + ": empty matrix");
  if (!m.allFinite()) throw InvalidInput(std::string(what) + ": non-finite entries");
}

// BDCSVD falls back to Jacobi internally for small blocks.
inline Eigen::BDCSVD<Matrix> thin_svd(const Matrix& m) {
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd;
}

/// Moore-Penrose pseudoinverse. Singular values below rel_tol * sigma_max are
/// treated as exact zeros.
inline Matrix pinv(const Matrix& m, double rel_tol = 1e-12) {
  require_finite(m, "pinv");
  if (!(rel_tol > 0.0)) throw InvalidInput("pinv: tolerance must be positive");
  const auto svd = thin_svd(m);
  const Vector& s = svd.singularValues();
  const double cutoff = rel_tol * (s.size() ? s(0) : 0.0);
  Vector inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff && s(i) > 0.0) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Numerical rank under the same relative cutoff convention as pinv.
inline Eigen::Index rank(const Matrix& m, double rel_tol = 1e-12) {
  const auto svd = thin_svd(m);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0)) ++r;
  return r;
}

struct OlsFit {
  Vector coefficients;
  Vector residuals;
  double sse = 0.0;
  double sigma2 = 0.0;
  Matrix cov;
  long dof = 0;
};

/// Ordinary least squares with the classical coefficient covariance
/// sigma2 * (X'X)^-1, sigma2 = SSE / (n - p).
inline OlsFit ols(const Matrix& X, const Vector& y, double rel_tol = 1e-12) {
  require_finite(X, "ols");
  if (y.size() != X.rows()) throw InvalidInput("ols: y length does not match rows of X");
  if (!y.allFinite()) throw InvalidInput("ols: non-finite response");
  if (X.rows() <= X.cols())
    throw InvalidInput("ols: need more rows (" + std::to_string(X.rows()) + ") than columns (" +
                       std::to_string(X.cols()) + ")");

  const auto svd = thin_svd(X);
  const Vector& s = svd.singularValues();
  const double cutoff = rel_tol * s(0);
  if (s(0) == 0.0 || s(s.size() - 1) <= cutoff) {
    // Locate the first column that adds no rank.
    long offending = 0;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      if (rank(X.leftCols(j + 1), rel_tol) < j + 1) {
        offending = static_cast<long>(j);
        break;
      }
    }
    throw SingularDesign(offending, "ols: singular design, column " + std::to_string(offending) +
                                        " is linearly dependent on earlier columns");
  }

  OlsFit fit;
  const Vector sinv = s.cwiseInverse();
  fit.coefficients = svd.matrixV() * (sinv.asDiagonal() * (svd.matrixU().transpose() * y));
  fit.residuals = y - X * fit.coefficients;
  fit.sse = fit.residuals.squaredNorm();
  fit.dof = static_cast<long>(X.rows() - X.cols());
  fit.sigma2 = fit.sse / static_cast<double>(fit.dof);
  const Matrix vs = svd.matrixV() * sinv.asDiagonal();
  fit.cov = fit.sigma2 * (vs * vs.transpose());
  return fit;
}

}  // namespace numkit
}  // namespace engagedyn
