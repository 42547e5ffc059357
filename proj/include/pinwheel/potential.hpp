#pragma once
// Radial trapping potentials V(|x|) below their limit V_inf at infinity.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "pinwheel/config.hpp"

namespace pinwheel {

enum class PotentialProfile { ExponentialWell, Constant, Tabulated };

/// V(r) = V_inf - C0 exp(-lambda sqrt(V_inf) r) for the exponential well,
/// V_inf for the constant profile, or linear interpolation of radial samples
/// (held at V_inf beyond the last sample).
struct RadialPotential {
  PotentialProfile profile = PotentialProfile::ExponentialWell;
  double v_inf = 1.0;
  double c0 = 0.5;
  double lambda = 0.5;
  /// Radius from which the decay bound is required (0 for the exponential well).
  double r0 = 0.0;
  std::vector<double> table_r;
  std::vector<double> table_v;

  static RadialPotential exponential_well(double v_inf, double c0, double lambda) {
    RadialPotential v;
    v.v_inf = v_inf;
    v.c0 = c0;
    v.lambda = lambda;
    return v;
  }

  static RadialPotential constant(double v_inf) {
    RadialPotential v;
    v.profile = PotentialProfile::Constant;
    v.v_inf = v_inf;
    v.c0 = 0.0;
    v.lambda = 0.0;
    return v;
  }

  /// Tabulated profile; c0/lambda/r0 describe the decay bound it must meet.
  static RadialPotential tabulated(std::vector<double> r, std::vector<double> values, double v_inf,
                                   double c0, double lambda, double r0) {
    if (r.size() != values.size() || r.size() < 2)
      throw ConfigError("tabulated potential needs >= 2 matching samples");
    if (!std::is_sorted(r.begin(), r.end()) || r.front() < 0.0)
      throw ConfigError("tabulated radii must be sorted and nonnegative");
    RadialPotential v;
    v.profile = PotentialProfile::Tabulated;
    v.v_inf = v_inf;
    v.c0 = c0;
    v.lambda = lambda;
    v.r0 = r0;
    v.table_r = std::move(r);
    v.table_v = std::move(values);
    return v;
  }

  /// Default experiment potential for a given (ell, n).
  static RadialPotential default_for(int ell, int n) {
    return exponential_well(1.0, 0.5, std::sin(std::numbers::pi / (ell * n)));
  }

  /// The decay bound V_inf - C0 exp(-lambda sqrt(V_inf) r).
  double bound(double r) const {
    return v_inf - c0 * std::exp(-lambda * std::sqrt(v_inf) * r);
  }
};

inline double evaluate(const RadialPotential& v, double r) {
  if (r < 0.0 || std::isnan(r)) throw ConfigError("potential evaluated at negative radius");
  switch (v.profile) {
  case PotentialProfile::ExponentialWell:
    return v.bound(r);
  case PotentialProfile::Constant:
    return v.v_inf;
  case PotentialProfile::Tabulated: {
    const auto& tr = v.table_r;
    if (r <= tr.front()) return v.table_v.front();
    if (r >= tr.back()) return v.v_inf;
    const auto it = std::upper_bound(tr.begin(), tr.end(), r);
    const auto hi = static_cast<std::size_t>(it - tr.begin());
    const double t = (r - tr[hi - 1]) / (tr[hi] - tr[hi - 1]);
    return (1.0 - t) * v.table_v[hi - 1] + t * v.table_v[hi];
  }
  }
  return v.v_inf;
}

struct PotentialCheck {
  bool ok = true;
  bool positive = true; ///< inf V > 0 and V_inf > 0
  bool decay = true;    ///< exponential bound and the lambda range
  std::vector<std::string> reasons;
  double inf_v = 0.0;
};

/// Checks positivity of inf V, the exponential decay bound on a radius
/// sample beyond r0, and lambda < 2 sin(pi/(ell n)).
inline PotentialCheck validate(const RadialPotential& v, int ell, int n) {
  PotentialCheck out;
  auto fail = [&](bool& flag, std::string why) {
    out.ok = false;
    flag = false;
    out.reasons.push_back(std::move(why));
  };
  if (!(v.v_inf > 0.0)) fail(out.positive, "V_inf must be positive");

  // inf over a dense radius sample plus the limit value
  const double r_hi = std::max({50.0, v.r0 + 50.0, v.table_r.empty() ? 0.0 : v.table_r.back()});
  double inf_v = v.v_inf;
  constexpr int samples = 4000;
  for (int i = 0; i <= samples; ++i) {
    const double r = r_hi * i / samples;
    inf_v = std::min(inf_v, evaluate(v, r));
  }
  if (!v.table_r.empty())
    for (double t : v.table_v) inf_v = std::min(inf_v, t);
  out.inf_v = inf_v;
  if (!(inf_v > 0.0)) fail(out.positive, "inf V = " + std::to_string(inf_v) + " is not positive");

  if (v.profile == PotentialProfile::Constant) {
    fail(out.decay, "constant profile has no exponential well");
  } else {
    if (!(v.c0 > 0.0)) fail(out.decay, "C0 must be positive");
    if (!(v.lambda > 0.0)) fail(out.decay, "lambda must be positive");
    const double lam_max = 2.0 * std::sin(std::numbers::pi / (ell * n));
    if (!(v.lambda < lam_max))
      fail(out.decay, "lambda = " + std::to_string(v.lambda) + " is not below 2 sin(pi/(ell n)) = " +
           std::to_string(lam_max));
    for (int i = 0; i <= samples; ++i) {
      const double r = v.r0 + (r_hi - v.r0) * i / samples;
      if (evaluate(v, r) > v.bound(r) + 1e-14 * v.v_inf) {
        fail(out.decay, "decay bound violated at r = " + std::to_string(r));
        break;
      }
    }
  }
  return out;
}

} // namespace pinwheel
