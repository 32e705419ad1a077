#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "engagedyn/data.hpp"
#include "engagedyn/gompertz_model.hpp"
#include "engagedyn/numkit/nlls.hpp"
#include "engagedyn/numkit/segmented.hpp"
#include "engagedyn/synth.hpp"

namespace engagedyn::gompertz {

inline constexpr long kMinSeriesLength = 14;

struct FitConfig {
  std::optional<double> c_max;   // default: see default_c_max
  std::optional<double> lambda;  // oracle event penalty; default 0.01 x SSE of the K = 0 fit
  std::optional<int> k_max;      // force the number of events instead of estimating it
  int multistart = 8;
  int max_breaks = 6;
  double onset_window = 5.0;  // t_k stays within +- this many days of its candidate
  double perturbation = 0.2;  // multistart initials are scaled by 1 + U(-p, p)
  std::size_t max_oracle_candidates = 6;
  std::uint64_t seed = 0;
  numkit::NllsOptions nlls;
};

/// 3 x the least-squares slope of the final quarter of the series; falls
/// back to 3 x the mean absolute daily increment there, then to 1.
inline double default_c_max(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n < 2) return 1.0;
  const std::size_t from = std::min((3 * n) / 4, n - 2);
  long double sx = 0, sy = 0, sxx = 0, sxy = 0, inc = 0;
  const long double m = static_cast<long double>(n - from);
  for (std::size_t t = from; t < n; ++t) {
    sx += t;
    sy += v[t];
    sxx += static_cast<long double>(t) * t;
    sxy += static_cast<long double>(t) * v[t];
    if (t > from) inc += std::abs(v[t] - v[t - 1]);
  }
  const long double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  if (slope > 0) return 3.0 * static_cast<double>(slope);
  const long double mean_inc = inc / (m - 1);
  return mean_inc > 0 ? 3.0 * static_cast<double>(mean_inc) : 1.0;
}

namespace detail {

inline void check_series(std::span<const double> v, const char* who) {
  if (static_cast<long>(v.size()) < kMinSeriesLength)
    throw InsufficientData(std::string(who) + ": series length " + std::to_string(v.size()) + " < " +
                           std::to_string(kMinSeriesLength));
  for (double x : v)
    if (!std::isfinite(x)) throw InvalidInput(std::string(who) + ": non-finite value in series");
}

inline double resolve_c_max(std::span<const double> v, const FitConfig& cfg) {
  if (cfg.c_max) {
    if (!(*cfg.c_max > 0.0) || !std::isfinite(*cfg.c_max)) throw InvalidInput("gompertz: c_max must be > 0");
    return *cfg.c_max;
  }
  return default_c_max(v);
}

}  // namespace detail

struct KmaxEstimate {
  int k_max = 0;
  std::vector<long> candidates;  // onset days of the post-initial burst runs
  std::vector<long> pool;        // candidates first, then other segment boundaries by jump size
  double c_max = 0.0;
  numkit::SegmentedFit segments;
};

/// Segmented regression of the cumulative series; segments with slope >=
/// c_max are bursts, as are boundaries whose one-day level jump exceeds c_max
/// plus a noise margin of 3 sqrt(2) residual standard deviations.
/// Consecutive bursts form a run; the run at the start is the upload's own
/// viral rise, every later run is one exogenous event whose onset is the
/// day before the run starts.
inline KmaxEstimate estimate_kmax(std::span<const double> v, const FitConfig& cfg = {}) {
  detail::check_series(v, "estimate_kmax");
  KmaxEstimate est;
  est.c_max = detail::resolve_c_max(v, cfg);
  est.segments = numkit::segmented_regression(v, cfg.max_breaks);
  const auto& seg = est.segments.segments;
  // Level jumps compare two fitted line ends, each carrying residual noise.
  const double jump_margin = 3.0 * std::sqrt(2.0 * est.segments.sse / static_cast<double>(v.size()));

  struct Piece {
    long start;
    bool burst;
    double jump;
    bool initial;  // first segment or the boundary right after it
  };
  std::vector<Piece> pieces;
  for (std::size_t i = 0; i < seg.size(); ++i) {
    pieces.push_back({seg[i].start, seg[i].slope >= est.c_max, seg[i].slope, i == 0});
    if (i + 1 < seg.size()) {
      const long s = seg[i + 1].start;
      const double jump = seg[i + 1].at(static_cast<double>(s)) - seg[i].at(static_cast<double>(s - 1));
      const bool joins = seg[i].slope >= est.c_max && seg[i + 1].slope >= est.c_max;
      pieces.push_back({s, joins || jump > est.c_max + jump_margin, jump, i == 0});
    }
  }

  struct Boundary {
    long day;
    double jump;
  };
  std::vector<Boundary> others;
  bool in_run = false, run_initial = false;
  for (const auto& p : pieces) {
    if (p.burst) {
      if (!in_run) {
        in_run = true;
        run_initial = p.initial;
        if (!run_initial) est.candidates.push_back(p.start - 1);
      }
    } else {
      in_run = false;
    }
  }
  const long n = static_cast<long>(v.size());
  for (std::size_t i = 1; i < seg.size(); ++i) {
    const long day = seg[i].start - 1;
    if (day < 1 || day > n - 2) continue;
    if (std::find(est.candidates.begin(), est.candidates.end(), day) != est.candidates.end()) continue;
    const double jump = seg[i].at(static_cast<double>(seg[i].start)) - seg[i - 1].at(static_cast<double>(day));
    others.push_back({day, jump});
  }
  std::stable_sort(others.begin(), others.end(), [](const Boundary& a, const Boundary& b) { return a.jump > b.jump; });
  est.pool = est.candidates;
  for (const auto& b : others) est.pool.push_back(b.day);
  est.k_max = static_cast<int>(est.candidates.size());
  return est;
}

// ---------------------------------------------------------------------------
// Fitting

struct Decomposition {
  std::vector<double> total;
  std::vector<double> viral;                // burst part of component 0
  std::vector<double> migration;            // sum of every component's c_k (t - t_k)
  std::vector<std::vector<double>> events;  // burst part of component k = 1..K
};

inline Decomposition decompose(const Params& p, long horizon) {
  Decomposition d;
  const std::size_t K = p.k_max();
  d.events.assign(K, {});
  for (long t = 0; t < horizon; ++t) {
    const double tt = static_cast<double>(t);
    d.viral.push_back(burst_part(p.components[0], tt));
    double mig = 0.0;
    for (const auto& c : p.components) mig += migration_part(c, tt);
    d.migration.push_back(mig);
    double tot = d.viral.back() + mig;
    for (std::size_t k = 1; k <= K; ++k) {
      d.events[k - 1].push_back(burst_part(p.components[k], tt));
      tot += d.events[k - 1].back();
    }
    d.total.push_back(tot);
  }
  return d;
}

struct GompertzFit {
  Params params;
  double sse = 0.0;
  bool converged = true;
  std::string stop_reason;
  int k_max = 0;
  std::vector<long> candidates;  // onset candidates the fit started from
  double c_max = 0.0;
  Decomposition decomposition;
};

namespace detail {

inline std::size_t offset(std::size_t k) { return k == 0 ? 0 : 4 + 5 * (k - 1); }
inline std::size_t n_params(std::size_t K) { return 4 + 5 * K; }

inline Params unpack(const Vector& x, std::size_t K) {
  Params p;
  p.components.resize(K + 1);
  for (std::size_t k = 0; k <= K; ++k) {
    auto o = static_cast<Eigen::Index>(offset(k));
    auto& c = p.components[k];
    if (k > 0) c.onset = x(o++);
    c.M = x(o);
    c.eta = x(o + 1);
    c.b = x(o + 2);
    c.c = x(o + 3);
  }
  return p;
}

inline Vector pack(const Params& p) {
  const std::size_t K = p.k_max();
  Vector x(static_cast<Eigen::Index>(n_params(K)));
  for (std::size_t k = 0; k <= K; ++k) {
    auto o = static_cast<Eigen::Index>(offset(k));
    const auto& c = p.components[k];
    if (k > 0) x(o++) = c.onset;
    x(o) = c.M;
    x(o + 1) = c.eta;
    x(o + 2) = c.b;
    x(o + 3) = c.c;
  }
  return x;
}

struct Problem {
  std::span<const double> y;
  std::vector<long> candidates;
  double c_max;
  Vector lo, hi;
};

inline Problem make_problem(std::span<const double> y, std::vector<long> candidates, double c_max,
                            const FitConfig& cfg) {
  Problem pr{y, std::move(candidates), c_max, {}, {}};
  const std::size_t K = pr.candidates.size();
  const long n = static_cast<long>(y.size());
  const double ymax = std::max(1.0, *std::max_element(y.begin(), y.end()));
  pr.lo.resize(static_cast<Eigen::Index>(n_params(K)));
  pr.hi.resize(pr.lo.size());
  for (std::size_t k = 0; k <= K; ++k) {
    auto o = static_cast<Eigen::Index>(offset(k));
    if (k > 0) {
      const double cand = static_cast<double>(pr.candidates[k - 1]);
      double lo = std::max({cand - cfg.onset_window, 1.0});
      double hi = std::min(cand + cfg.onset_window, static_cast<double>(n - 2));
      if (k > 1) lo = std::max(lo, 0.5 * (cand + static_cast<double>(pr.candidates[k - 2])) + 0.25);
      if (k < K) hi = std::min(hi, 0.5 * (cand + static_cast<double>(pr.candidates[k])) - 0.25);
      pr.lo(o) = lo;
      pr.hi(o) = hi;
      ++o;
    }
    pr.lo(o) = 0.0;
    pr.hi(o) = 10.0 * ymax;
    pr.lo(o + 1) = 1e-4;
    pr.hi(o + 1) = 10.0;
    pr.lo(o + 2) = 1e-4;
    pr.hi(o + 2) = 5.0;
    pr.lo(o + 3) = 0.0;
    pr.hi(o + 3) = 5.0 * c_max;
  }
  return pr;
}

inline Vector residuals(const Problem& pr, const Vector& x) {
  const Params p = unpack(x, pr.candidates.size());
  Vector r(static_cast<Eigen::Index>(pr.y.size()));
  for (std::size_t t = 0; t < pr.y.size(); ++t) r(static_cast<Eigen::Index>(t)) = eval_model(p, static_cast<double>(t)) - pr.y[t];
  return r;
}

inline Matrix jacobian(const Problem& pr, const Vector& x) {
  const std::size_t K = pr.candidates.size();
  const Params p = unpack(x, K);
  Matrix J = Matrix::Zero(static_cast<Eigen::Index>(pr.y.size()), x.size());
  for (std::size_t t = 0; t < pr.y.size(); ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    for (std::size_t k = 0; k <= K; ++k) {
      const ComponentGradient g = component_gradient(p.components[k], static_cast<double>(t));
      auto o = static_cast<Eigen::Index>(offset(k));
      if (k > 0) J(row, o++) = g.d_onset;
      J(row, o) = g.d_M;
      J(row, o + 1) = g.d_eta;
      J(row, o + 2) = g.d_b;
      J(row, o + 3) = g.d_c;
    }
  }
  return J;
}

// Least-squares line through y[a..b].
inline std::pair<double, double> line_fit(std::span<const double> y, long a, long b) {
  long double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const long double m = static_cast<long double>(b - a + 1);
  for (long t = a; t <= b; ++t) {
    sx += t;
    sy += y[static_cast<std::size_t>(t)];
    sxx += static_cast<long double>(t) * t;
    sxy += static_cast<long double>(t) * y[static_cast<std::size_t>(t)];
  }
  const long double den = m * sxx - sx * sx;
  if (den == 0) return {static_cast<double>(sy / m), 0.0};
  const long double slope = (m * sxy - sx * sy) / den;
  return {static_cast<double>((sy - slope * sx) / m), static_cast<double>(slope)};
}

/// Data-driven start: a line through the latter half of each inter-onset
/// region; M_k is the level jump between neighbouring lines at t_k and c_k
/// the slope increment.
inline Vector initial_guess(const Problem& pr) {
  const std::size_t K = pr.candidates.size();
  const long n = static_cast<long>(pr.y.size());
  std::vector<long> edges{0};
  for (long c : pr.candidates) edges.push_back(c);
  edges.push_back(n);
  std::vector<std::pair<double, double>> lines;
  for (std::size_t k = 0; k <= K; ++k) {
    const long a0 = edges[k], b = edges[k + 1] - 1;
    const long len = b - a0 + 1;
    long a = a0 + len / 2;
    if (b - a < 1) a = std::max(a0, b - 1);
    lines.push_back(b > a ? line_fit(pr.y, a, b) : std::make_pair(pr.y[static_cast<std::size_t>(b)], 0.0));
  }
  Params p;
  p.components.resize(K + 1);
  for (std::size_t k = 0; k <= K; ++k) {
    auto& c = p.components[k];
    const double tk = static_cast<double>(edges[k]);
    const double level = lines[k].first + lines[k].second * tk;
    const double prev = k == 0 ? 0.0 : lines[k - 1].first + lines[k - 1].second * tk;
    c.onset = tk;
    c.M = level - prev;
    c.c = lines[k].second - (k == 0 ? 0.0 : lines[k - 1].second);
    c.eta = 1.0;
    c.b = 0.1;
  }
  Vector x = pack(p);
  for (std::size_t k = 0; k <= K; ++k) {
    const auto o = static_cast<Eigen::Index>(offset(k) + (k > 0 ? 1 : 0));
    x(o) = std::max(x(o), 1.0);
  }
  return numkit::detail::project(x, pr.lo, pr.hi);
}

struct Attempt {
  Vector x;
  double sse = std::numeric_limits<double>::infinity();
  bool converged = true;
  std::string stop_reason;
};

inline Attempt solve(const Problem& pr, const Vector& x0, const Vector& lo, const Vector& hi,
                     const numkit::NllsOptions& opt) {
  Attempt a;
  auto res = [&](const Vector& x) { return residuals(pr, x); };
  auto jac = [&](const Vector& x) { return jacobian(pr, x); };
  try {
    const auto r = numkit::nlls(res, jac, x0, lo, hi, opt);
    a.x = r.x;
    a.sse = r.sse;
    a.stop_reason = r.stop_reason;
    a.converged = r.stop_reason != "max-iterations";
  } catch (const StalledError& e) {
    a.x = e.best();
    a.sse = e.best_sse();
    a.stop_reason = "stalled";
    a.converged = false;
  }
  return a;
}

/// Continuous solve, then onsets rounded to whole days and the remaining
/// parameters re-polished with onsets fixed.
inline Attempt solve_and_round(const Problem& pr, const Vector& x0, const numkit::NllsOptions& opt) {
  Attempt a = solve(pr, x0, pr.lo, pr.hi, opt);
  Vector lo = pr.lo, hi = pr.hi;
  Vector x = a.x;
  for (std::size_t k = 1; k <= pr.candidates.size(); ++k) {
    const auto o = static_cast<Eigen::Index>(offset(k));
    const double t = std::clamp(std::round(x(o)), std::ceil(pr.lo(o)), std::floor(pr.hi(o)));
    x(o) = lo(o) = hi(o) = t;
  }
  Attempt b = solve(pr, x, lo, hi, opt);
  b.converged = a.converged && b.converged;
  if (!a.converged) b.stop_reason = a.stop_reason;
  return b;
}

inline Vector perturb(const Vector& x, const Problem& pr, double amount, synth::Rng rng) {
  Vector y = x;
  for (Eigen::Index j = 0; j < y.size(); ++j) y(j) *= 1.0 + rng.uniform(-amount, amount);
  return numkit::detail::project(y, pr.lo, pr.hi);
}

/// Warm start: a fit on a subset of the candidates with zero-size components
/// at the new candidates, which reproduces the subset fit exactly.
inline std::optional<Vector> extend(const Problem& pr, const GompertzFit& warm) {
  const std::size_t K = pr.candidates.size();
  Params p;
  p.components.push_back(warm.params.components[0]);
  for (std::size_t k = 0; k < K; ++k) {
    const long cand = pr.candidates[k];
    const auto it = std::find(warm.candidates.begin(), warm.candidates.end(), cand);
    if (it != warm.candidates.end()) {
      p.components.push_back(warm.params.components[static_cast<std::size_t>(it - warm.candidates.begin()) + 1]);
    } else {
      p.components.push_back({static_cast<double>(cand), 0.0, 1.0, 0.1, 0.0});
    }
  }
  if (p.components.size() != K + 1) return std::nullopt;
  Vector x = pack(p);
  const Vector clipped = numkit::detail::project(x, pr.lo, pr.hi);
  return clipped;
}

}  // namespace detail

/// Multistart bound-constrained fit with the given onset candidates. Start 0
/// is the data-driven guess, starts 1.. perturb it by +-20% on independent
/// streams of `cfg.seed`; the lowest SSE wins (lowest start index on ties).
/// A warm fit on a subset of the candidates adds its own start, so adding
/// candidates never raises the SSE.
inline GompertzFit fit_candidates(std::span<const double> y, std::vector<long> candidates, const FitConfig& cfg,
                                  const GompertzFit* warm = nullptr) {
  detail::check_series(y, "gompertz fit");
  const long n = static_cast<long>(y.size());
  std::sort(candidates.begin(), candidates.end());
  if (std::adjacent_find(candidates.begin(), candidates.end()) != candidates.end())
    throw InvalidInput("gompertz fit: duplicate candidate day");
  for (long c : candidates)
    if (c < 1 || c > n - 2) throw InvalidInput("gompertz fit: candidate day " + std::to_string(c) + " out of range");
  if (cfg.multistart < 1) throw InvalidInput("gompertz fit: multistart must be >= 1");

  const double c_max = detail::resolve_c_max(y, cfg);
  const detail::Problem pr = detail::make_problem(y, candidates, c_max, cfg);
  const Vector x0 = detail::initial_guess(pr);

  const synth::Rng root(cfg.seed);
  detail::Attempt best;
  for (int i = 0; i < cfg.multistart; ++i) {
    const Vector start = i == 0 ? x0 : detail::perturb(x0, pr, cfg.perturbation, root.split(static_cast<std::uint64_t>(i)));
    detail::Attempt a = detail::solve_and_round(pr, start, cfg.nlls);
    if (a.sse < best.sse) best = std::move(a);
  }
  if (warm) {
    if (const auto xw = detail::extend(pr, *warm)) {
      detail::Attempt as_is;
      as_is.x = *xw;
      as_is.sse = detail::residuals(pr, *xw).squaredNorm();
      as_is.converged = warm->converged;
      as_is.stop_reason = warm->stop_reason;
      detail::Attempt a = detail::solve_and_round(pr, *xw, cfg.nlls);
      if (a.sse < best.sse) best = std::move(a);
      if (as_is.sse < best.sse) best = std::move(as_is);
    }
  }

  GompertzFit f;
  f.params = detail::unpack(best.x, candidates.size());
  f.sse = best.sse;
  f.converged = best.converged;
  f.stop_reason = best.stop_reason;
  f.k_max = static_cast<int>(candidates.size());
  f.candidates = candidates;
  f.c_max = c_max;
  f.decomposition = decompose(f.params, n);
  return f;
}

/// Two-stage pipeline: K_max and onset candidates from estimate_kmax (or a
/// forced K taking the first K days of the candidate pool), then nested fits
/// K = 0, 1, ..., each warm-starting the next.
inline GompertzFit fit(std::span<const double> y, const FitConfig& cfg = {}) {
  detail::check_series(y, "gompertz fit");
  std::vector<long> pool;
  int K = 0;
  if (cfg.k_max && *cfg.k_max < 0) throw InvalidInput("gompertz fit: k_max must be >= 0");
  if (!cfg.k_max || *cfg.k_max > 0) {
    const KmaxEstimate est = estimate_kmax(y, cfg);
    pool = est.pool;
    K = cfg.k_max.value_or(est.k_max);
    if (static_cast<std::size_t>(K) > pool.size())
      throw InvalidInput("gompertz fit: cannot place " + std::to_string(K) + " events, only " +
                         std::to_string(pool.size()) + " candidate days");
  }
  std::optional<GompertzFit> prev;
  for (int k = 0; k <= K; ++k) {
    std::vector<long> cands(pool.begin(), pool.begin() + k);
    prev = fit_candidates(y, cands, cfg, prev ? &*prev : nullptr);
  }
  return *prev;
}

// ---------------------------------------------------------------------------
// Exhaustive oracle

struct SubsetScore {
  std::vector<long> days;
  double sse = 0.0;
  double objective = 0.0;
};

struct OracleResult {
  GompertzFit fit;
  double lambda = 0.0;
  double objective = 0.0;
  std::vector<long> selected;
  std::vector<SubsetScore> subsets;  // by mask order
};

/// Enumerates every subset of the candidate days (component 0 is always
/// present), fits each with the same routine as the pipeline and minimizes
/// SSE + lambda * (number of events). Ties prefer fewer events.
inline OracleResult minlp_oracle(std::span<const double> y, std::vector<long> candidates, const FitConfig& cfg = {}) {
  detail::check_series(y, "minlp_oracle");
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  if (candidates.size() > cfg.max_oracle_candidates)
    throw InvalidInput("minlp_oracle: combinatorial limit, " + std::to_string(candidates.size()) +
                       " candidates exceed " + std::to_string(cfg.max_oracle_candidates) +
                       "; use estimate_kmax + fit instead");
  const std::size_t c = candidates.size();
  const std::uint32_t masks = 1u << c;
  std::vector<std::uint32_t> order(masks);
  for (std::uint32_t m = 0; m < masks; ++m) order[m] = m;
  std::stable_sort(order.begin(), order.end(),
                   [](std::uint32_t a, std::uint32_t b) { return std::popcount(a) < std::popcount(b); });

  std::vector<std::optional<GompertzFit>> fits(masks);
  for (std::uint32_t m : order) {
    std::vector<long> days;
    for (std::size_t i = 0; i < c; ++i)
      if (m & (1u << i)) days.push_back(candidates[i]);
    const GompertzFit* warm = nullptr;
    if (m != 0) warm = &*fits[m & ~(1u << (std::bit_width(m) - 1))];
    fits[m] = fit_candidates(y, days, cfg, warm);
  }

  OracleResult out;
  out.lambda = cfg.lambda.value_or(0.01 * fits[0]->sse);
  if (!(out.lambda >= 0.0)) throw InvalidInput("minlp_oracle: lambda must be >= 0");
  std::uint32_t best = 0;
  double best_obj = std::numeric_limits<double>::infinity();
  for (std::uint32_t m = 0; m < masks; ++m) {
    const double obj = fits[m]->sse + out.lambda * std::popcount(m);
    out.subsets.push_back({fits[m]->candidates, fits[m]->sse, obj});
    const bool better = obj < best_obj || (obj == best_obj && std::popcount(m) < std::popcount(best));
    if (better) {
      best = m;
      best_obj = obj;
    }
  }
  out.fit = *fits[best];
  out.objective = best_obj;
  out.selected = out.fit.candidates;
  return out;
}

// ---------------------------------------------------------------------------
// Playlists

struct PlaylistEntry {
  std::size_t index = 0;
  std::string id;
  bool ok = false;
  std::string error;
  double virality = 0.0;   // M_0
  double migration = 0.0;  // c_0
  double early_views = 0.0;  // cumulative views over the first 7 days
  double sse = 0.0;
};

enum class CorrelationStatus { ok, degenerate, not_applicable };

inline std::string_view to_string(CorrelationStatus s) {
  switch (s) {
    case CorrelationStatus::ok: return "ok";
    case CorrelationStatus::degenerate: return "degenerate";
    case CorrelationStatus::not_applicable: return "not_applicable";
  }
  return "?";
}

struct PlaylistProfile {
  std::vector<PlaylistEntry> videos;
  CorrelationStatus status = CorrelationStatus::not_applicable;
  std::optional<double> spearman;  // early views vs migration slope
};

inline std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

/// Spearman correlation with average ranks; nullopt when either side is all ties.
inline std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

/// K = 0 fit per video, then the rank correlation between first-week views
/// and the fitted migration slope across the videos that fitted.
inline PlaylistProfile playlist_profile(const std::vector<std::vector<double>>& videos,
                                        const std::vector<std::string>& ids = {}, const FitConfig& cfg = {}) {
  PlaylistProfile out;
  FitConfig c = cfg;
  c.k_max = 0;
  std::vector<double> early, slope;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    PlaylistEntry e;
    e.index = i;
    e.id = i < ids.size() ? ids[i] : std::to_string(i);
    try {
      const GompertzFit f = fit(videos[i], c);
      e.ok = true;
      e.virality = f.params.components[0].M;
      e.migration = f.params.components[0].c;
      e.sse = f.sse;
      e.early_views = videos[i][std::min<std::size_t>(6, videos[i].size() - 1)];
      early.push_back(e.early_views);
      slope.push_back(e.migration);
    } catch (const Error& err) {
      e.error = err.what();
    }
    out.videos.push_back(std::move(e));
  }
  if (early.size() < 2) {
    out.status = CorrelationStatus::not_applicable;
  } else if (auto rho = spearman(early, slope)) {
    out.status = CorrelationStatus::ok;
    out.spearman = rho;
  } else {
    out.status = CorrelationStatus::degenerate;
  }
  return out;
}

}  // namespace engagedyn::gompertz
