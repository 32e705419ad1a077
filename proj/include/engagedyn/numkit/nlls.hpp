#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "engagedyn/numkit/linalg.hpp"

namespace engagedyn::numkit {

using ResidualFn = std::function<Vector(const Vector&)>;
using JacobianFn = std::function<Matrix(const Vector&)>;

struct NllsOptions {
  int max_iter = 500;
  double rel_sse_tol = 1e-10;
  double grad_tol = 1e-8;
  double initial_damping = 1e-3;
  double max_damping = 1e12;
  /// Relative forward-difference step when no Jacobian is supplied.
  double fd_step = 1e-7;
};

struct NllsResult {
  Vector x;
  double sse = 0.0;
  int iterations = 0;
  std::string stop_reason;
};

namespace detail {

inline Vector project(const Vector& x, const Vector& lo, const Vector& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

inline double sse_of(const Vector& r) {
  return r.allFinite() ? r.squaredNorm() : std::numeric_limits<double>::infinity();
}

inline Matrix forward_difference(const ResidualFn& f, const Vector& x, const Vector& r0,
                                 const Vector& lo, const Vector& hi, double rel_step) {
  Matrix J(r0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    double h = rel_step * std::max(1.0, std::abs(x(j)));
    Vector xp = x;
    // Step backwards when the forward point would leave the box (unless the
    // backward point would too, for a degenerate box).
    if (xp(j) + h > hi(j) && xp(j) - h >= lo(j)) h = -h;
    xp(j) += h;
    J.col(j) = (f(xp) - r0) / h;
  }
  return J;
}

}  // namespace detail

/// Bound-constrained Levenberg-Marquardt with Marquardt diagonal scaling.
/// Trial points are projected onto [lower, upper]; only SSE-decreasing steps
/// are accepted. Throws StalledError (carrying the best iterate) when the
/// damping exceeds its ceiling before any stopping rule fires.
inline NllsResult nlls(const ResidualFn& residual, const JacobianFn& jacobian, const Vector& x0,
                       const Vector& lower, const Vector& upper, const NllsOptions& opt = {}) {
  const Eigen::Index p = x0.size();
  if (lower.size() != p || upper.size() != p) throw InvalidInput("nlls: bound dimension mismatch");
  if ((lower.array() > upper.array()).any()) throw InvalidInput("nlls: lower bound above upper bound");
  if ((x0.array() < lower.array()).any() || (x0.array() > upper.array()).any())
    throw InvalidInput("nlls: x0 outside bounds");

  Vector x = x0;
  Vector r = residual(x);
  if (!r.allFinite()) throw InvalidInput("nlls: residual not finite at x0");
  double sse = r.squaredNorm();

  auto jac = [&](const Vector& at, const Vector& r_at) {
    return jacobian ? jacobian(at) : detail::forward_difference(residual, at, r_at, lower, upper, opt.fd_step);
  };

  NllsResult out;
  double mu = opt.initial_damping;
  Matrix J = jac(x, r);
  for (int it = 0; it < opt.max_iter; ++it) {
    out.iterations = it + 1;
    if (sse == 0.0) {
      out.stop_reason = "zero-residual";
      out.x = x;
      out.sse = sse;
      return out;
    }
    const Vector g = J.transpose() * r;
    // Projected gradient: components pushing against an active bound do not count.
    const Vector pg = x - detail::project(x - g, lower, upper);
    if (pg.lpNorm<Eigen::Infinity>() < opt.grad_tol) {
      out.stop_reason = "gradient";
      break;
    }
    Matrix JtJ = J.transpose() * J;
    Vector diag = JtJ.diagonal().cwiseMax(1e-12 * std::max(1.0, JtJ.diagonal().maxCoeff()));
    // Variables pinned at a bound with the gradient pushing outward stay fixed.
    Vector g_free = g;
    for (Eigen::Index j = 0; j < p; ++j) {
      const bool pinned = (x(j) <= lower(j) && g(j) > 0.0) || (x(j) >= upper(j) && g(j) < 0.0);
      if (pinned) {
        JtJ.row(j).setZero();
        JtJ.col(j).setZero();
        JtJ(j, j) = 1.0;
        diag(j) = 1.0;
        g_free(j) = 0.0;
      }
    }

    bool accepted = false;
    while (!accepted) {
      Matrix A = JtJ;
      A.diagonal() += mu * diag;
      const Vector step = A.ldlt().solve(-g_free);
      const Vector trial = detail::project(x + step, lower, upper);
      const Vector r_trial = residual(trial);
      const double sse_trial = detail::sse_of(r_trial);
      if (sse_trial < sse) {
        const double rel = (sse - sse_trial) / sse;
        x = trial;
        r = r_trial;
        sse = sse_trial;
        mu = std::max(mu / 3.0, 1e-15);
        accepted = true;
        if (rel < opt.rel_sse_tol) {
          out.stop_reason = "relative-sse";
          out.x = x;
          out.sse = sse;
          return out;
        }
        J = jac(x, r);
      } else {
        // A rejected step whose SSE change is below resolution means we sit at
        // a stationary point to working precision.
        if (std::isfinite(sse_trial) && std::abs(sse_trial - sse) <= opt.rel_sse_tol * sse) {
          out.stop_reason = "relative-sse";
          out.x = x;
          out.sse = sse;
          return out;
        }
        mu *= 4.0;
        if (mu > opt.max_damping)
          throw StalledError("nlls: damping exceeded " + std::to_string(opt.max_damping), x, sse);
      }
    }
  }
  if (out.stop_reason.empty()) out.stop_reason = "max-iterations";
  out.x = x;
  out.sse = sse;
  return out;
}

/// Finite-difference Jacobian variant.
inline NllsResult nlls(const ResidualFn& residual, const Vector& x0, const Vector& lower,
                       const Vector& upper, const NllsOptions& opt = {}) {
  return nlls(residual, JacobianFn{}, x0, lower, upper, opt);
}

}  // namespace engagedyn::numkit
