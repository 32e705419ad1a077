#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "engagedyn/error.hpp"

namespace engagedyn::gompertz {

/// One Gompertz-plus-migration component switched on at `onset`.
struct Component {
  double onset = 0.0;  // t_k, days after upload
  double M = 0.0;      // saturation views excluding migration
  double eta = 1.0;    // shape
  double b = 0.1;      // growth rate per day
  double c = 0.0;      // migration slope, views/day
};

/// Component 0 is the upload itself (onset 0); the rest are exogenous events.
struct Params {
  std::vector<Component> components;

  std::size_t k_max() const { return components.empty() ? 0 : components.size() - 1; }
};

/// e^{b tau} beyond this exponent is treated as infinite; the saturating term is then exactly M.
inline constexpr double kExpGuard = 700.0;

/// Saturating (viral or event) part of one component at day t; 0 before onset.
inline double burst_part(const Component& k, double t) {
  const double tau = t - k.onset;
  if (tau <= 0.0) return 0.0;
  const double z = k.b * tau;
  if (z > kExpGuard) return k.M;
  return k.M * -std::expm1(-k.eta * std::expm1(z));
}

inline double migration_part(const Component& k, double t) {
  const double tau = t - k.onset;
  return tau > 0.0 ? k.c * tau : 0.0;
}

inline double component_value(const Component& k, double t) { return burst_part(k, t) + migration_part(k, t); }

/// Cumulative views of the generalized Gompertz model at day t.
inline double eval_model(const Params& p, double t) {
  double v = 0.0;
  for (const auto& k : p.components) v += component_value(k, t);
  return v;
}

/// Partial derivatives of one component w.r.t. (onset, M, eta, b, c) at day t.
struct ComponentGradient {
  double d_onset = 0.0, d_M = 0.0, d_eta = 0.0, d_b = 0.0, d_c = 0.0;
};

inline ComponentGradient component_gradient(const Component& k, double t) {
  ComponentGradient g;
  const double tau = t - k.onset;
  if (tau <= 0.0) return g;
  const double z = k.b * tau;
  g.d_c = tau;
  if (z > kExpGuard) {
    g.d_M = 1.0;
    g.d_onset = -k.c;
    return g;
  }
  const double em1 = std::expm1(z);         // e^{b tau} - 1
  const double G = std::exp(-k.eta * em1);  // inner decay
  const double GE = std::exp(-k.eta * em1 + z);
  g.d_M = -std::expm1(-k.eta * em1);
  g.d_eta = k.M * G * em1;
  g.d_b = k.M * k.eta * GE * tau;
  g.d_onset = -(k.M * k.eta * k.b * GE + k.c);
  return g;
}

inline void validate(const Params& p, double horizon = -1.0) {
  if (p.components.empty()) throw InvalidInput("gompertz: at least one component required");
  if (p.components[0].onset != 0.0) throw InvalidInput("gompertz: component 0 must start at t = 0");
  for (std::size_t k = 0; k < p.components.size(); ++k) {
    const auto& c = p.components[k];
    const std::string tag = "gompertz: component " + std::to_string(k) + ": ";
    if (!std::isfinite(c.onset) || !std::isfinite(c.M) || !std::isfinite(c.eta) || !std::isfinite(c.b) ||
        !std::isfinite(c.c))
      throw InvalidInput(tag + "non-finite parameter");
    if (c.M < 0.0) throw InvalidInput(tag + "M must be >= 0");
    if (!(c.eta > 0.0)) throw InvalidInput(tag + "eta must be > 0");
    if (!(c.b > 0.0)) throw InvalidInput(tag + "b must be > 0");
    if (c.c < 0.0) throw InvalidInput(tag + "c must be >= 0");
    if (k > 0 && !(c.onset > p.components[k - 1].onset)) throw InvalidInput(tag + "onsets must strictly increase");
    if (horizon > 0.0 && !(c.onset < horizon)) throw InvalidInput(tag + "onset beyond horizon");
  }
}

}  // namespace engagedyn::gompertz
