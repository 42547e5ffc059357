#pragma once
// Scalar problems: the radial ground state of the limit equation, the
// least-energy G_n-invariant solution on the polar grid, the cutoff omega_r
// and the disjoint-bump test tuple with its energy gap below ell n c_inf.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pinwheel/config.hpp"
#include "pinwheel/functional.hpp"
#include "pinwheel/grid.hpp"
#include "pinwheel/potential.hpp"
#include "pinwheel/solver.hpp"
#include "pinwheel/symmetry.hpp"

namespace pinwheel {

/// Cell-centred radial grid r_i = (i + 1/2) dr with a Dirichlet node at
/// r_max and measure |S^{d-1}| r^{d-1} dr (twice dr for the even 1D case).
class RadialGrid {
public:
  RadialGrid(int dim, std::size_t nr, double r_max) : dim_(dim), nr_(nr), r_max_(r_max) {
    if (dim < 1) throw ConfigError("radial grid dimension must be >= 1");
    if (nr < 8) throw ConfigError("radial grid needs at least 8 nodes");
    if (!(r_max > 0.0)) throw ConfigError("radial grid needs r_max > 0");
    dr_ = r_max / (static_cast<double>(nr) + 0.5);
    const double area = sphere_area(dim);
    r_.resize(nr);
    w_.resize(nr);
    edge_.resize(nr);
    for (std::size_t i = 0; i < nr; ++i) {
      r_[i] = (static_cast<double>(i) + 0.5) * dr_;
      w_[i] = area * std::pow(r_[i], dim - 1) * dr_;
      edge_[i] = area * std::pow(r_[i] + 0.5 * dr_, dim - 1) / dr_; // edge i -> i+1 (or Dirichlet)
    }
  }

  int dim() const { return dim_; }
  std::size_t size() const { return nr_; }
  double r_max() const { return r_max_; }
  double dr() const { return dr_; }
  double r(std::size_t i) const { return r_[i]; }
  std::span<const double> radii() const { return r_; }
  std::span<const double> weights() const { return w_; }
  std::span<const double> edges() const { return edge_; }

  double gradient_form(std::span<const double> u) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nr_; ++i) {
      const double d = u[i] - (i + 1 < nr_ ? u[i + 1] : 0.0);
      acc += edge_[i] * d * d;
    }
    return acc;
  }

  /// Solves (A) x = rhs for the tridiagonal stiffness of <.,.>_V (Thomas).
  std::vector<double> solve_stiffness(std::span<const double> pot, std::span<const double> rhs) const {
    std::vector<double> diag(nr_), c(nr_), x(rhs.begin(), rhs.end());
    for (std::size_t i = 0; i < nr_; ++i) diag[i] = edge_[i] + (i > 0 ? edge_[i - 1] : 0.0) + w_[i] * pot[i];
    // forward sweep with off-diagonals -edge_[i] between i and i+1
    c[0] = nr_ > 1 ? -edge_[0] / diag[0] : 0.0;
    x[0] /= diag[0];
    for (std::size_t i = 1; i < nr_; ++i) {
      const double lower = -edge_[i - 1];
      const double den = diag[i] - lower * c[i - 1];
      c[i] = i + 1 < nr_ ? -edge_[i] / den : 0.0;
      x[i] = (x[i] - lower * x[i - 1]) / den;
    }
    for (std::size_t i = nr_ - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
    return x;
  }

private:
  int dim_;
  std::size_t nr_;
  double r_max_, dr_ = 0.0;
  std::vector<double> r_, w_, edge_;
};

/// Radial least-energy solution omega with its energy c = (p-1)/(2p)||omega||^2.
struct GroundState {
  RadialGrid grid{2, 8, 1.0};
  std::vector<double> profile;
  double energy = 0.0;
  double p = 2.0;
  RadialPotential potential = RadialPotential::constant(1.0);
  double residual = 0.0; ///< max-norm residual of the radial equation
  std::size_t iterations = 0;

  int dim() const { return grid.dim(); }

  /// Cubic interpolation of omega(r) (even at 0, zero at and beyond r_max).
  double value(double r) const {
    r = std::abs(r);
    if (r >= grid.r_max()) return 0.0;
    const double dr = grid.dr();
    const double pos = r / dr - 0.5;
    const auto base = static_cast<long>(std::floor(pos));
    const double t = pos - static_cast<double>(base);
    const long n = static_cast<long>(profile.size());
    auto at = [&](long i) {
      if (i < 0) i = -i - 1;
      return i < n ? profile[static_cast<std::size_t>(i)] : 0.0;
    };
    const double p0 = at(base - 1), p1 = at(base), p2 = at(base + 1), p3 = at(base + 2);
    // Catmull-Rom
    return p1 + 0.5 * t * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)));
  }
};

struct RadialSolveOptions {
  std::size_t nr = 2000;
  double r_max = 24.0;
  double tol = 1e-6;
  std::size_t max_iter = 5000;
  /// Optional starting profile on the radial nodes (defaults to a Gaussian).
  std::vector<double> initial;
};

namespace detail {

inline double radial_self(const RadialGrid& g, std::span<const double> u, double p) {
  double acc = 0.0;
  const auto w = g.weights();
  for (std::size_t i = 0; i < u.size(); ++i) acc += w[i] * std::pow(std::abs(u[i]), 2.0 * p);
  return acc;
}

inline double radial_quad(const RadialGrid& g, std::span<const double> u, std::span<const double> pot) {
  double acc = g.gradient_form(u);
  const auto w = g.weights();
  for (std::size_t i = 0; i < u.size(); ++i) acc += w[i] * pot[i] * u[i] * u[i];
  return acc;
}

} // namespace detail

/// Radial ground state of -Delta u + V u = |u|^{2p-2} u in R^dim with V constant.
///
/// Nehari-projected gradient descent in the <.,.>_V metric: the direction
/// u - A^{-1}(w |u|^{2p-2} u) needs one tridiagonal solve per step.
inline GroundState ground_state_radial(int dim, double v_const, double p, RadialSolveOptions opts = {}) {
  PinwheelConfig::scalar(1, dim, p).validate_common();
  if (!(v_const > 0.0)) throw ConfigError("limit potential must be positive");
  RadialGrid g(dim, opts.nr, opts.r_max);
  const std::size_t n = g.size();
  const std::vector<double> pot(n, v_const);
  const auto w = g.weights();

  std::vector<double> u(n);
  if (opts.initial.empty()) {
    for (std::size_t i = 0; i < n; ++i) u[i] = std::exp(-0.5 * v_const * g.r(i) * g.r(i));
  } else {
    if (opts.initial.size() != n) throw ConfigError("initial profile has the wrong length");
    u = opts.initial;
  }

  auto project = [&](std::vector<double>& f, double& quad) {
    const double self = detail::radial_self(g, f, p);
    if (!(self > 0.0)) throw NonpositiveDenominator(self);
    quad = detail::radial_quad(g, f, pot);
    const double s = std::pow(quad / self, 1.0 / (2.0 * p - 2.0));
    for (double& x : f) x *= s;
    quad *= s * s;
  };

  double quad = 0.0;
  project(u, quad);
  double energy = (p - 1.0) / (2.0 * p) * quad;

  auto residual = [&](std::span<const double> f) {
    std::vector<double> r(n, 0.0);
    const auto e = g.edges();
    for (std::size_t i = 0; i < n; ++i) {
      const double d = f[i] - (i + 1 < n ? f[i + 1] : 0.0);
      r[i] += e[i] * d;
      if (i + 1 < n) r[i + 1] -= e[i] * d;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double val = r[i] / w[i] + v_const * f[i] - std::pow(std::abs(f[i]), 2.0 * p - 2.0) * f[i];
      worst = std::max(worst, std::abs(val));
    }
    return worst;
  };

  GroundState out;
  std::vector<double> rhs(n), trial(n);
  double res = residual(u);
  std::size_t it = 0;
  for (; it < opts.max_iter && res >= opts.tol; ++it) {
    for (std::size_t i = 0; i < n; ++i) rhs[i] = w[i] * std::pow(std::abs(u[i]), 2.0 * p - 2.0) * u[i];
    const auto z = g.solve_stiffness(pot, rhs);
    // direction d = u - z; trial = u - tau d = (1 - tau) u + tau z
    bool accepted = false;
    for (double tau = 1.0; tau > 1e-6; tau *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = (1.0 - tau) * u[i] + tau * z[i];
      double q = 0.0;
      project(trial, q);
      const double e_new = (p - 1.0) / (2.0 * p) * q;
      // slack at rounding level; near convergence the decrease is below it
      if (e_new <= energy * (1.0 + 1e-13)) {
        u.swap(trial);
        energy = e_new;
        quad = q;
        accepted = true;
        break;
      }
    }
    res = residual(u);
    if (!accepted) break;
  }
  if (res >= opts.tol)
    throw ConvergenceError("radial ground state did not converge (residual " + std::to_string(res) + ")");
  // positive representative
  if (std::accumulate(u.begin(), u.end(), 0.0) < 0.0)
    for (double& x : u) x = -x;

  out.grid = g;
  out.profile = std::move(u);
  out.energy = energy;
  out.p = p;
  out.potential = RadialPotential::constant(v_const);
  out.residual = res;
  out.iterations = it;
  return out;
}

/// Least-energy G_n-invariant solution on the polar grid.
struct GnGroundState {
  ComponentField field;
  double energy = 0.0;
  SolveReport report;
  /// Energies of every start that was tried, in order.
  std::vector<double> candidates;
};

/// Scalar (ell = 1) instance of the system minimisation. Several starts are
/// tried (a centred bump plus n-bump rings) and the lowest energy is kept.
inline GnGroundState ground_state_Gn(const RadialPotential& v, int n, double p, GridPtr grid,
                                     SolverOptions opts = {},
                                     std::vector<double> ring_radii = {}) {
  const auto cfg = PinwheelConfig::scalar(n, grid->dim(), p);
  cfg.validate_common();
  if (!validate(v, 1, n).positive) throw ConfigError("potential violates inf V > 0");
  if (ring_radii.empty()) ring_radii = {0.0, 0.25 * grid->r_max()};
  GnGroundState best;
  bool have = false;
  for (double r0 : ring_radii) {
    const auto init = default_initial_guess(cfg, grid, v, r0);
    auto rep = minimize(cfg, v, grid, init, opts);
    best.candidates.push_back(rep.energy);
    if (!have || rep.energy < best.energy) {
      best.energy = rep.energy;
      best.field = rep.field;
      best.report = std::move(rep);
      have = true;
    }
  }
  return best;
}

/// Quintic smoothstep cutoff: 1 on [0, 1-eps], 0 on [1, inf), C^2 in between.
inline double cutoff(double t, double eps) {
  if (t <= 1.0 - eps) return 1.0;
  if (t >= 1.0) return 0.0;
  const double x = (t - (1.0 - eps)) / eps;
  return 1.0 - x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

/// omega_r(x) = chi(|x|/r) omega(|x|) sampled on the radial nodes of omega.
inline std::vector<double> truncate_profile(const GroundState& omega, double r, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("cutoff eps must lie in (0, 1)");
  if (!(r > 0.0)) throw ConfigError("cutoff radius must be positive");
  std::vector<double> out(omega.profile.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = cutoff(omega.grid.r(i) / r, eps) * omega.profile[i];
  return out;
}

/// omega_r centred at the origin on the polar grid.
inline ComponentField truncate(const GroundState& omega, double r, double eps, GridPtr grid) {
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("cutoff eps must lie in (0, 1)");
  if (!(r > 0.0)) throw ConfigError("cutoff radius must be positive");
  return ComponentField::sample(grid, [&](double x, double y, double s) {
    const double rho = std::sqrt(x * x + y * y + s * s);
    return cutoff(rho / r, eps) * omega.value(rho);
  });
}

/// Default cutoff parameter: midpoint of (0, (d - lambda)/(d + lambda)).
inline double default_cutoff_eps(const PinwheelConfig& cfg, const RadialPotential& v) {
  const double d = cfg.pinwheel_chord();
  return (d - v.lambda) / (2.0 * (d + v.lambda));
}

/// varrho = (d_{ell n} + lambda)/4.
inline double bump_radius_factor(const PinwheelConfig& cfg, const RadialPotential& v) {
  return (cfg.pinwheel_chord() + v.lambda) / 4.0;
}

namespace detail {

/// Average of V(|c + rho sigma|) over sigma in S^{dim-1}, |c| = dist.
inline double sphere_average(const RadialPotential& v, int dim, double dist, double rho, int nodes = 256) {
  // sigma_1 = cos(phi), density proportional to sin^{dim-2}(phi) on [0, pi]
  double num = 0.0, den = 0.0;
  for (int k = 0; k <= nodes; ++k) {
    const double phi = std::numbers::pi * k / nodes;
    const double wt = (k == 0 || k == nodes ? 0.5 : 1.0) * (dim == 2 ? 1.0 : std::pow(std::sin(phi), dim - 2));
    const double rr = std::sqrt(std::max(0.0, dist * dist + rho * rho + 2.0 * dist * rho * std::cos(phi)));
    num += wt * evaluate(v, rr);
    den += wt;
  }
  return num / den;
}

} // namespace detail

struct TestTuple {
  double radius = 0.0;      ///< R
  double bump_radius = 0.0; ///< varrho R
  double eps = 0.0;
  double t_r = 0.0;         ///< Nehari normalisation of the component
  double energy = 0.0;      ///< (p-1)/(2p) ell ||w_{1,R}||_V^2
  double limit = 0.0;       ///< ell n c_inf
  double gap = 0.0;         ///< limit - energy
  ComponentField field;     ///< w_{1,R} on the polar grid (empty without a grid)
  double grid_energy = std::numeric_limits<double>::quiet_NaN(); ///< J of the sampled field
  double max_overlap = 0.0; ///< largest off-diagonal coupling integral on the grid
};

/// Disjoint-bump test tuple w_R and its energy.
///
/// The energy is evaluated in bump-centred radial coordinates on the nodes
/// of omega (supports are disjoint, so the tuple energy is ell n times one
/// bump); the grid field, when a grid is given, is the same tuple sampled on
/// the polar grid and is checked for exactly vanishing coupling integrals.
inline TestTuple build_test_tuple(double radius, const PinwheelConfig& cfg, const GroundState& omega,
                                  const RadialPotential& v, GridPtr grid = nullptr,
                                  double eps = std::numeric_limits<double>::quiet_NaN()) {
  if (!(radius > 0.0)) throw ConfigError("test-tuple radius must be positive");
  if (omega.dim() != cfg.dim) throw ConfigError("ground state dimension does not match config");
  TestTuple out;
  out.radius = radius;
  out.eps = std::isfinite(eps) ? eps : default_cutoff_eps(cfg, v);
  const double rho = bump_radius_factor(cfg, v);
  out.bump_radius = rho * radius;
  if (out.bump_radius >= omega.grid.r_max())
    throw OverlapError("bump radius exceeds the ground-state grid");
  // bumps of different components must be disjoint: chord > 2 varrho R
  if (!(orbit_min_chord(radius, cfg.ell, cfg.n) > 2.0 * out.bump_radius))
    throw OverlapError("test-tuple bumps overlap");

  const auto prof = truncate_profile(omega, out.bump_radius, out.eps);
  const auto& rg = omega.grid;
  const auto w = rg.weights();
  const double p = cfg.p;
  double quad = rg.gradient_form(prof), self = 0.0, quad_inf = rg.gradient_form(omega.profile), self_inf = 0.0;
  for (std::size_t i = 0; i < prof.size(); ++i) {
    if (prof[i] != 0.0) quad += w[i] * detail::sphere_average(v, cfg.dim, radius, rg.r(i)) * prof[i] * prof[i];
    self += w[i] * std::pow(std::abs(prof[i]), 2.0 * p);
    quad_inf += w[i] * v.v_inf * omega.profile[i] * omega.profile[i];
    self_inf += w[i] * std::pow(std::abs(omega.profile[i]), 2.0 * p);
  }
  const double lw = cfg.ell * cfg.n;
  // t^{2p-2} = ||w_hat||^2 / |w_hat|_{2p}^{2p}; both carry the factor n
  const double t2 = std::pow(quad / self, 1.0 / (p - 1.0));
  out.t_r = std::sqrt(t2);
  out.energy = lw * (p - 1.0) / (2.0 * p) * t2 * quad;
  const double c_inf = (p - 1.0) / (2.0 * p) * std::pow(std::pow(quad_inf, p) / self_inf, 1.0 / (p - 1.0));
  out.limit = lw * c_inf;
  out.gap = out.limit - out.energy;

  if (grid) {
    if (radius + out.bump_radius > grid->r_max()) throw OverlapError("test-tuple support leaves the grid");
    const auto centres = orbit_points(radius, cfg.ell, cfg.n).front();
    const double br = out.bump_radius;
    out.field = ComponentField::sample(grid, [&](double x, double y, double s) {
      double acc = 0.0;
      for (const auto& c : centres) {
        const double d = std::sqrt((x - c.x) * (x - c.x) + (y - c.y) * (y - c.y) + s * s);
        if (d < br) acc += cutoff(d / br, out.eps) * omega.value(d);
      }
      return out.t_r * acc;
    });
    const auto ov = overlap(out.field, cfg);
    for (const auto& row : ov.overlap)
      for (double o : row) out.max_overlap = std::max(out.max_overlap, o);
    if (out.max_overlap != 0.0) throw OverlapError("test-tuple components overlap on the grid");
    out.grid_energy = EnergyModel(cfg, grid, v).energy(out.field.values);
  }
  return out;
}

struct DecaySample {
  double radius = 0.0;
  double energy = 0.0;
};

struct DecayFit {
  double rate = 0.0;      ///< fitted exponential decay rate of the gap
  double intercept = 0.0; ///< log C_1
  std::vector<double> gaps;
};

/// Least-squares slope of log(ell n c_inf - E_R) against R.
inline DecayFit decay_fit(std::span<const DecaySample> samples, double c_inf, const PinwheelConfig& cfg) {
  if (samples.size() < 3) throw ConfigError("decay fit needs at least 3 samples");
  const double limit = cfg.ell * cfg.n * c_inf;
  DecayFit out;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& s : samples) {
    const double gap = limit - s.energy;
    if (!(gap > 0.0))
      throw ConvergenceError("energy bound fails at R = " + std::to_string(s.radius) +
                             " (gap " + std::to_string(gap) + ")");
    out.gaps.push_back(gap);
    const double y = std::log(gap);
    sx += s.radius;
    sy += y;
    sxx += s.radius * s.radius;
    sxy += s.radius * y;
  }
  const double k = static_cast<double>(samples.size());
  const double den = k * sxx - sx * sx;
  if (den == 0.0) throw ConfigError("decay fit needs distinct radii");
  const double slope = (k * sxy - sx * sy) / den;
  out.rate = -slope;
  out.intercept = (sy - slope * sx) / k;
  return out;
}

} // namespace pinwheel
