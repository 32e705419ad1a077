#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "engagedyn/data.hpp"
#include "engagedyn/numkit/linalg.hpp"
#include "engagedyn/numkit/spectral.hpp"

namespace engagedyn::granger {

struct ArOptions {
  int n_s = 3;
  int n_v = 3;
  bool intercept = false;
  bool difference = false;  // first-difference both series before fitting
  bool swap = false;        // regress views on subscriber lags instead
};

/// s(t) = [c] + sum_{k=1..n_s} a_k s(t-k) + sum_{k=1..n_v} b_k v(t-k) + e(t).
struct ArFit {
  int n_s = 0;
  int n_v = 0;
  bool intercept = false;
  std::optional<double> constant;
  Vector a;
  Vector b;
  numkit::OlsFit ols;  // coefficient order: [constant], a_1..a_ns, b_1..b_nv
  double response_sq = 0.0;  // |y|^2 of the fitted response

  Eigen::Index b_offset() const { return (intercept ? 1 : 0) + n_s; }
  const Vector& residuals() const { return ols.residuals; }
};

inline long min_length(int n_s, int n_v) { return std::max(n_s, n_v) + n_s + n_v + 5 + 1; }

/// Fits on raw aligned series (already differenced/swapped by the caller if wanted).
inline ArFit fit_ar(const std::vector<double>& s, const std::vector<double>& v, int n_s, int n_v,
                    bool intercept = false) {
  if (n_s < 0 || n_v < 1) throw InvalidInput("fit_ar: need n_s >= 0 and n_v >= 1");
  if (s.size() != v.size()) throw InvalidInput("fit_ar: series lengths differ");
  const long T = static_cast<long>(s.size());
  if (T < min_length(n_s, n_v))
    throw InsufficientData("fit_ar: series length " + std::to_string(T) + " too short, need > " +
                           std::to_string(min_length(n_s, n_v) - 1) + " for n_s=" + std::to_string(n_s) +
                           ", n_v=" + std::to_string(n_v));
  const long p = std::max(n_s, n_v);
  const long rows = T - p;
  const long cols = (intercept ? 1 : 0) + n_s + n_v;
  Matrix X(rows, cols);
  Vector y(rows);
  for (long r = 0; r < rows; ++r) {
    const long t = r + p;
    long c = 0;
    if (intercept) X(r, c++) = 1.0;
    for (int k = 1; k <= n_s; ++k) X(r, c++) = s[static_cast<std::size_t>(t - k)];
    for (int k = 1; k <= n_v; ++k) X(r, c++) = v[static_cast<std::size_t>(t - k)];
    y(r) = s[static_cast<std::size_t>(t)];
  }

  ArFit fit;
  fit.n_s = n_s;
  fit.n_v = n_v;
  fit.intercept = intercept;
  fit.ols = numkit::ols(X, y);
  fit.response_sq = y.squaredNorm();
  const Vector& beta = fit.ols.coefficients;
  if (intercept) fit.constant = beta(0);
  fit.a = beta.segment(intercept ? 1 : 0, n_s);
  fit.b = beta.segment(fit.b_offset(), n_v);
  return fit;
}

inline std::vector<double> first_difference(const std::vector<double>& x) {
  std::vector<double> d;
  for (std::size_t i = 1; i < x.size(); ++i) d.push_back(x[i] - x[i - 1]);
  return d;
}

inline ArFit fit_ar(const ChannelSeries& ch, const ArOptions& opt = {}) {
  if (ch.subscribers.size() != ch.views.size()) throw InvalidInput("fit_ar: channel arrays differ in length");
  std::vector<double> s = opt.swap ? ch.views : ch.subscribers;
  std::vector<double> v = opt.swap ? ch.subscribers : ch.views;
  if (opt.difference) {
    s = first_difference(s);
    v = first_difference(v);
  }
  return fit_ar(s, v, opt.n_s, opt.n_v, opt.intercept);
}

struct LjungBox {
  double Q = 0.0;
  int h = 0;
  int dof = 0;
  double p = 1.0;
};

/// Q = n(n+2) sum_{k=1..h} rho_k^2 / (n-k), p = chi2_sf(Q, h - fitted_params).
inline LjungBox ljung_box(const Vector& residuals, int h = 10, int fitted_params = 0) {
  if (h <= fitted_params)
    throw InvalidInput("ljung_box: invalid dof, h=" + std::to_string(h) + " must exceed fitted parameters (" +
                       std::to_string(fitted_params) + ")");
  const long n = static_cast<long>(residuals.size());
  if (n <= h) throw InsufficientData("ljung_box: need more residuals than lags");
  LjungBox lb;
  lb.h = h;
  lb.dof = h - fitted_params;
  const Vector e = residuals.array() - residuals.mean();
  const double denom = e.squaredNorm();
  if (!(denom > 0.0)) return lb;  // no variation: every autocorrelation is 0
  double acc = 0.0;
  for (int k = 1; k <= h; ++k) {
    const double rho = e.tail(n - k).dot(e.head(n - k)) / denom;
    acc += rho * rho / static_cast<double>(n - k);
  }
  lb.Q = static_cast<double>(n) * static_cast<double>(n + 2) * acc;
  lb.p = numkit::chi2_sf(lb.Q, lb.dof);
  return lb;
}

struct Wald {
  double W = 0.0;
  int dof = 0;
  double p = 1.0;
};

inline constexpr double kMaxWaldCondition = 1e12;

/// W = b' cov_bb^-1 b for H0: b_1 = ... = b_nv = 0.
inline Wald wald_test(const ArFit& fit) {
  Wald w;
  w.dof = fit.n_v;
  const Vector& b = fit.b;
  if (fit.ols.sigma2 == 0.0) {
    // Exact fit: the covariance vanishes, so any nonzero b is infinitely significant.
    if (b.cwiseAbs().maxCoeff() == 0.0) return w;
    w.W = std::numeric_limits<double>::infinity();
    w.p = 0.0;
    return w;
  }
  const Matrix cov = fit.ols.cov.block(fit.b_offset(), fit.b_offset(), fit.n_v, fit.n_v);
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(cov, Eigen::EigenvaluesOnly).eigenvalues();
  const double cond = ev(0) > 0.0 ? ev(ev.size() - 1) / ev(0) : std::numeric_limits<double>::infinity();
  if (!(cond <= kMaxWaldCondition))
    throw NumericalError("wald_test: singular b-block covariance (condition number " + std::to_string(cond) + ")");
  w.W = b.dot(cov.ldlt().solve(b));
  w.p = numkit::chi2_sf(w.W, w.dof);
  return w;
}

struct GrangerReport {
  std::string channel_id;
  std::string category;
  int n_s = 0;
  int n_v = 0;
  std::vector<double> a;
  std::vector<double> b;
  LjungBox ljung_box;
  Wald wald;
  bool adequacy_pass = false;
  std::optional<bool> causality;  // only when adequacy passes
};

inline constexpr double kExactFitRatio = 1e-24;

struct CausalityOptions {
  ArOptions ar;
  double alpha = 0.05;
  int lb_lags = 10;
  // Ljung-Box dof = h - n_s by default. Exogenous lags do not constrain the
  // residual autocorrelations; counting them too (h - n_s - n_v) over-rejects
  // white residuals roughly fourfold at n_s = n_v = 3.
  bool lb_count_exogenous = false;
};

namespace detail {

template <class F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.error_class(), std::string(name) + ": " + e.what());
  }
}

}  // namespace detail

/// fit_ar -> ljung_box -> wald_test. Adequate when the Ljung-Box p exceeds
/// alpha; causal when adequate and the Wald p is below alpha.
inline GrangerReport channel_causality(const ChannelSeries& ch, const CausalityOptions& opt = {}) {
  GrangerReport r;
  r.channel_id = ch.channel_id;
  r.category = ch.category;
  r.n_s = opt.ar.n_s;
  r.n_v = opt.ar.n_v;
  const ArFit fit = detail::stage("fit", [&] { return fit_ar(ch, opt.ar); });
  r.a.assign(fit.a.data(), fit.a.data() + fit.a.size());
  r.b.assign(fit.b.data(), fit.b.data() + fit.b.size());
  const int fitted = opt.ar.n_s + (opt.lb_count_exogenous ? opt.ar.n_v : 0);
  r.ljung_box = detail::stage("ljung-box", [&] {
    // Residuals of an exact fit are rounding noise with no autocorrelation content.
    if (fit.ols.sse <= kExactFitRatio * fit.response_sq)
      return ljung_box(Vector::Zero(fit.ols.residuals.size()), opt.lb_lags, fitted);
    return ljung_box(fit.ols.residuals, opt.lb_lags, fitted);
  });
  r.wald = detail::stage("wald", [&] { return wald_test(fit); });
  r.adequacy_pass = r.ljung_box.p > opt.alpha;
  if (r.adequacy_pass) r.causality = r.wald.p < opt.alpha;
  return r;
}

struct CohortRow {
  std::string category;
  long n_channels = 0;
  long n_adequate = 0;
  long n_causal = 0;
  std::optional<double> fraction;  // n_causal / n_adequate
};

struct CohortSummary {
  std::vector<CohortRow> rows;  // sorted by category
  std::vector<std::string> notes;
};

inline CohortSummary cohort_summary(const std::vector<GrangerReport>& reports) {
  std::map<std::string, CohortRow> by;
  for (const auto& r : reports) {
    auto& row = by[r.category];
    row.category = r.category;
    ++row.n_channels;
    if (r.adequacy_pass) ++row.n_adequate;
    if (r.causality.value_or(false)) ++row.n_causal;
  }
  CohortSummary out;
  for (auto& [cat, row] : by) {
    if (row.n_adequate == 0) {
      out.notes.push_back("category '" + cat + "' omitted: no channel passed adequacy");
      continue;
    }
    row.fraction = static_cast<double>(row.n_causal) / static_cast<double>(row.n_adequate);
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace engagedyn::granger
