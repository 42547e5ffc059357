#pragma once
// Nehari-projected gradient descent for the equivariant energy, with
// beta-continuation and the boundary-mass / radiality diagnostics.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pinwheel/config.hpp"
#include "pinwheel/functional.hpp"
#include "pinwheel/grid.hpp"
#include "pinwheel/potential.hpp"
#include "pinwheel/preconditioner.hpp"
#include "pinwheel/symmetry.hpp"

namespace pinwheel {

/// Metric in which the descent direction is taken.
enum class DescentMetric {
  L2,       ///< weighted-L2 representer, scalar step from the stencil bound
  Diagonal, ///< representer scaled by the positive part of the Hessian diagonal
  Sobolev,  ///< (-Delta_h + V_max)^{-1} applied to the weighted representer
  Krylov,   ///< inexact solve with -Delta_h + V + coupling diagonal by Sobolev-preconditioned CG
  Auto,     ///< Sobolev on the unpinned nodes until steps keep shrinking, then Krylov
};

struct IterateInfo {
  std::size_t iteration = 0;
  double energy = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
  const ComponentField* field = nullptr;
};

struct SolverOptions {
  /// Gradient max-norm tolerance; <= 0 selects 1e-6 sqrt(c_inf) (or 1e-6).
  double tol = 0.0;
  std::size_t max_iter = 200000;
  bool clamp = true;
  int max_backtracks = 30;
  double armijo = 1e-4;
  DescentMetric metric = DescentMetric::Auto;
  /// Inner CG budget and relative residual for the Krylov metric.
  int krylov_iter = 40;
  double krylov_rtol = 0.05;
  /// Radius beyond which mass is counted as escaping; <= 0 selects 0.8 R_max.
  double fraction_radius = 0.0;
  /// Record boundary fraction every this many iterations.
  std::size_t monitor_stride = 100;
  /// Limit energy used for the strict-inequality certificate (NaN: skip).
  double c_inf = std::numeric_limits<double>::quiet_NaN();
  std::function<void(const IterateInfo&)> observer;
};

struct SolveReport {
  ComponentField field;
  PinwheelConfig config;
  double energy = 0.0;
  double component_energy = 0.0; ///< (p-1)/(2p) ||u_1||_V^2
  double nehari_residual = 0.0;  ///< relative to ||u_1||_V^2
  double grad_norm = 0.0;
  double tol = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::string status;
  std::vector<double> energy_trace;
  std::vector<double> boundary_trace; ///< sampled every monitor_stride iterations
  double boundary_fraction = 0.0;
  double radiality = 0.0;
  double wall_time = 0.0;
  double c_inf = std::numeric_limits<double>::quiet_NaN();
  bool below_threshold = false; ///< energy < ell n c_inf
  double margin = std::numeric_limits<double>::quiet_NaN(); ///< ell n c_inf - energy
  EnergyBreakdown breakdown;
};

/// Fraction of int |u|^{2p} carried by |x| > fraction_radius.
inline double splitting_monitor(const ComponentField& u1, double fraction_radius, double p = 2.0) {
  const auto& g = *u1.grid;
  if (!(fraction_radius > 0.0))
    throw ConfigError("fraction_radius must be positive");
  const auto w = g.weights();
  double inner = 0.0, outer = 0.0;
  for (std::size_t i = 0; i < g.nr(); ++i)
    for (std::size_t j = 0; j < g.ns(); ++j) {
      const bool out = g.radius(i, j) > fraction_radius;
      for (std::size_t k = 0; k < g.m(); ++k) {
        const std::size_t x = g.index(i, k, j);
        const double a = std::pow(std::abs(u1.values[x]), 2.0 * p) * w[x];
        (out ? outer : inner) += a;
      }
    }
  const double total = inner + outer;
  return total > 0.0 ? outer / total : 0.0;
}

/// max over rings of the angular variance of u_1, divided by (max u_1)^2.
inline double radiality_score(const ComponentField& u1) {
  const auto& g = *u1.grid;
  double umax = 0.0;
  for (double x : u1.values) umax = std::max(umax, std::abs(x));
  if (umax == 0.0) return 0.0;
  const double m = static_cast<double>(g.m());
  double worst = 0.0;
  for (std::size_t i = 0; i < g.nr(); ++i)
    for (std::size_t j = 0; j < g.ns(); ++j) {
      // shifted by the first value so that a constant ring gives exactly 0
      const double ref = u1(i, 0, j);
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t k = 0; k < g.m(); ++k) {
        const double d = u1(i, k, j) - ref;
        s1 += d;
        s2 += d * d;
      }
      worst = std::max(worst, std::max(s2 / m - (s1 / m) * (s1 / m), 0.0));
    }
  return worst / (umax * umax);
}

/// Sum of Gaussian bumps of width 1/sqrt(V_inf) at the component-1 pinwheel
/// points of radius r_init; optional multiplicative noise from a seeded RNG.
inline ComponentField default_initial_guess(const PinwheelConfig& cfg, GridPtr grid,
                                            const RadialPotential& v, double r_init,
                                            std::uint64_t seed = 0, double noise = 0.0) {
  const auto pts = orbit_points(r_init > 0.0 ? r_init : 1.0, std::max(cfg.ell, 1), cfg.n).front();
  const double a = 0.5 * v.v_inf;
  auto f = ComponentField::sample(grid, [&](double x, double y, double s) {
    double acc = 0.0;
    for (const auto& c : pts) {
      const double cx = r_init > 0.0 ? c.x : 0.0, cy = r_init > 0.0 ? c.y : 0.0;
      acc += std::exp(-a * ((x - cx) * (x - cx) + (y - cy) * (y - cy) + s * s));
    }
    return acc;
  });
  if (noise > 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& x : f.values) x *= 1.0 + noise * dist(rng);
  }
  return f;
}

namespace detail {

inline std::vector<double> neg_laplacian_diagonal(const PolarGrid& g) {
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<double> d(g.size(), 0.0);
  for_each_edge(g, [&](std::size_t a, std::size_t b, double c) {
    d[a] += c;
    if (b != npos) d[b] += c;
  });
  const auto w = g.weights();
  for (std::size_t x = 0; x < d.size(); ++x) d[x] /= w[x];
  return d;
}

} // namespace detail

/// Nehari-projected gradient descent from `initial`.
///
/// Each step is u <- s_v v with v = clamp_+(u - tau d), d the descent
/// direction in the chosen metric; tau backtracks (halving, Armijo) so the
/// energy never increases. Stops when the (clamp-projected) max norm of
/// the gradient representer drops below tol or the budget runs out.
inline SolveReport minimize(const PinwheelConfig& cfg, const RadialPotential& pot, GridPtr grid,
                            const ComponentField& initial, SolverOptions opts = {}) {
  const auto t_start = std::chrono::steady_clock::now();
  if (!initial.grid || !(initial.grid == grid || *initial.grid == *grid))
    throw GridMismatch("initial field does not live on the solver grid");
  const EnergyModel model(cfg, grid, pot);
  const auto& g = *grid;
  const std::size_t size = g.size();
  const double p = cfg.p;
  const double ell = cfg.ell;

  SolveReport rep;
  rep.config = cfg;
  rep.c_inf = opts.c_inf;
  rep.tol = opts.tol > 0.0 ? opts.tol
                           : 1e-6 * (std::isfinite(opts.c_inf) ? std::sqrt(opts.c_inf) : 1.0);
  const double frac_r = opts.fraction_radius > 0.0 ? opts.fraction_radius : 0.8 * g.r_max();
  const std::size_t stride = std::max<std::size_t>(opts.monitor_stride, 1);

  ComponentField u = initial;
  if (opts.clamp)
    for (double& x : u.values) x = std::max(x, 0.0);
  std::vector<double> a, b, c;
  model.powers(u.values, a, b);
  NehariTerms t = model.terms(u.values, a);
  {
    const double s = model.scale(t); // throws NonpositiveDenominator
    for (double& x : u.values) x *= s;
  }
  model.powers(u.values, a, b);
  t = model.terms(u.values, a);
  double energy = model.energy(t);

  const auto pot_nodes = model.potential();
  const auto lap_diag = detail::neg_laplacian_diagonal(g);
  double vmax = 0.0;
  for (double v : pot_nodes) vmax = std::max(vmax, std::abs(v));
  double stencil = 4.0 / (g.dr() * g.dr());
  if (g.cylindrical()) stencil += 4.0 / (g.ds() * g.ds());
  const double tau0 = opts.metric == DescentMetric::L2 ? 1.0 / (vmax + stencil) : 1.0;
  std::unique_ptr<StiffnessSolver> stiff;
  if (opts.metric != DescentMetric::L2 && opts.metric != DescentMetric::Diagonal) stiff = std::make_unique<StiffnessSolver>(grid, vmax);
  // energies are compared up to rounding of the sums that produce them
  const double round_tol = 1e-13;
  double tau = tau0;

  std::vector<double> grad(size), dir(size), trial(size), ta(size), tb(size), hdiag(size);
  std::vector<double> cg_r(size), cg_z(size), cg_p(size), cg_q(size);
  std::vector<char> active(size);
  // potential plus the positive coupling part of the Hessian diagonal
  auto fill_hdiag = [&] {
    model.powers(u.values, a, b);
    model.coupling_field(a, c);
    for (std::size_t x = 0; x < size; ++x) {
      double coup = 0.0;
      if (ell > 1.0) {
        const double ax = std::abs(u.values[x]);
        const double k = p == 2.0 ? 1.0 : std::pow(std::max(ax, 1e-12), p - 2.0);
        coup = (p - 1.0) * std::abs(cfg.beta) * c[x] * k;
      }
      hdiag[x] = pot_nodes[x] + coup;
    }
  };
  const auto w = g.weights();
  bool leave_sobolev = false;
  int short_steps = 0;

  for (std::size_t it = 0;; ++it) {
    model.gradient(u.values, grad);
    double gnorm = 0.0;
    bool any_pinned = false;
    for (std::size_t x = 0; x < size; ++x) {
      const bool pinned = opts.clamp && u.values[x] <= 0.0 && grad[x] > 0.0;
      any_pinned = any_pinned || pinned;
      if (!pinned) gnorm = std::max(gnorm, std::abs(grad[x]));
    }
    rep.energy_trace.push_back(energy);
    if (it % stride == 0) rep.boundary_trace.push_back(splitting_monitor(u, frac_r, p));
    rep.grad_norm = gnorm;
    rep.iterations = it;
    if (opts.observer) opts.observer(IterateInfo{it, energy, gnorm, tau, &u});
    if (gnorm < rep.tol) {
      rep.converged = true;
      rep.status = "converged";
      break;
    }
    if (it >= opts.max_iter) {
      rep.status = "budget_exhausted";
      break;
    }

    // stiff coupling defeats the plain Sobolev metric
    if (short_steps >= 20) leave_sobolev = true;
    const bool sobolev = opts.metric == DescentMetric::Sobolev || (opts.metric == DescentMetric::Auto && !leave_sobolev);
    const bool krylov = opts.metric == DescentMetric::Krylov || (opts.metric == DescentMetric::Auto && leave_sobolev);
    bool diagonal = opts.metric == DescentMetric::Diagonal;
    if (krylov || diagonal) fill_hdiag();
    for (std::size_t x = 0; x < size; ++x) active[x] = !(opts.clamp && u.values[x] <= 0.0 && grad[x] > 0.0);
    if (sobolev) {
      for (std::size_t x = 0; x < size; ++x) trial[x] = active[x] ? w[x] * grad[x] : 0.0;
      stiff->solve(trial, dir);
    } else if (krylov) {
      // CG from zero on the unpinned block; every iterate is a descent direction
      std::fill(dir.begin(), dir.end(), 0.0);
      double bnorm = 0.0;
      for (std::size_t x = 0; x < size; ++x) {
        cg_r[x] = active[x] ? w[x] * grad[x] : 0.0;
        bnorm += cg_r[x] * cg_r[x];
      }
      auto precondition = [&] {
        stiff->solve(cg_r, cg_z);
        double rz = 0.0;
        for (std::size_t x = 0; x < size; ++x) {
          if (!active[x]) cg_z[x] = 0.0;
          rz += cg_r[x] * cg_z[x];
        }
        return rz;
      };
      double rz = precondition();
      cg_p = cg_z;
      for (int k = 0; k < opts.krylov_iter && rz > 0.0; ++k) {
        std::fill(cg_q.begin(), cg_q.end(), 0.0);
        add_neg_laplacian(cg_p, g, cg_q);
        double pq = 0.0;
        for (std::size_t x = 0; x < size; ++x) {
          cg_q[x] = active[x] ? w[x] * (cg_q[x] + hdiag[x] * cg_p[x]) : 0.0;
          pq += cg_p[x] * cg_q[x];
        }
        if (!(pq > 0.0)) break;
        const double alpha = rz / pq;
        double rnorm = 0.0;
        for (std::size_t x = 0; x < size; ++x) {
          dir[x] += alpha * cg_p[x];
          cg_r[x] -= alpha * cg_q[x];
          rnorm += cg_r[x] * cg_r[x];
        }
        if (rnorm <= opts.krylov_rtol * opts.krylov_rtol * bnorm) break;
        const double rz_new = precondition();
        const double bcg = rz_new / rz;
        rz = rz_new;
        for (std::size_t x = 0; x < size; ++x) cg_p[x] = cg_z[x] + bcg * cg_p[x];
      }
    }
    if (sobolev || krylov) {
      if (any_pinned) {
        double sl = 0.0;
        for (std::size_t x = 0; x < size; ++x)
          if (!(u.values[x] <= 0.0 && dir[x] > 0.0)) sl += w[x] * grad[x] * dir[x];
        // the clamp can still spoil descent; take a diagonal step instead
        if (!(sl > 0.0)) {
          if (sobolev && opts.metric == DescentMetric::Auto) leave_sobolev = true;
          diagonal = true;
        }
      }
    } else if (opts.metric != DescentMetric::L2) {
      diagonal = true;
    }
    if (diagonal) {
      if (!(krylov || opts.metric == DescentMetric::Diagonal)) fill_hdiag();
      for (std::size_t x = 0; x < size; ++x) dir[x] = grad[x] / (lap_diag[x] + hdiag[x]);
    } else if (opts.metric == DescentMetric::L2) {
      std::copy(grad.begin(), grad.end(), dir.begin());
    }
    double slope = 0.0;
    for (std::size_t x = 0; x < size; ++x) {
      if (opts.clamp && u.values[x] <= 0.0 && dir[x] > 0.0) dir[x] = 0.0;
      slope += w[x] * grad[x] * dir[x];
    }
    slope *= ell;

    tau = std::min(tau0, 2.0 * tau);
    bool accepted = false;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt, tau *= 0.5) {
      for (std::size_t x = 0; x < size; ++x) {
        const double v = u.values[x] - tau * dir[x];
        trial[x] = opts.clamp ? std::max(v, 0.0) : v;
      }
      model.powers(trial, ta, tb);
      const NehariTerms tt = model.terms(trial, ta);
      if (!tt.admissible(cfg.beta)) continue;
      const double s = model.scale(tt);
      const double e_new = ell * (p - 1.0) / (2.0 * p) * s * s * tt.quad;
      const double predicted = opts.armijo * tau * slope;
      const double slack = predicted < round_tol * std::abs(energy) ? round_tol * std::abs(energy) : 0.0;
      if (e_new <= energy - predicted + slack) {
        for (std::size_t x = 0; x < size; ++x) u.values[x] = s * trial[x];
        energy = e_new;
        accepted = true;
        if (sobolev) short_steps = tau < 0.125 ? short_steps + 1 : 0;
        break;
      }
    }
    if (!accepted) {
      rep.status = "line_search_stalled";
      break;
    }
  }

  model.powers(u.values, a, b);
  t = model.terms(u.values, a);
  rep.energy = model.energy(t);
  rep.component_energy = (p - 1.0) / (2.0 * p) * t.quad;
  rep.nehari_residual = t.quad > 0.0 ? model.residual(t) / t.quad : 0.0;
  rep.boundary_fraction = splitting_monitor(u, frac_r, p);
  rep.radiality = radiality_score(u);
  rep.breakdown = model.breakdown(u.values);
  if (std::isfinite(opts.c_inf)) {
    rep.margin = ell * cfg.n * opts.c_inf - rep.energy;
    rep.below_threshold = rep.margin > 0.0;
  }
  if (!rep.converged && rep.boundary_trace.size() >= 3) {
    const auto& bt = rep.boundary_trace;
    const std::size_t q = bt.size() / 3;
    if (bt.back() > bt[q] && bt.back() > 1e-3) rep.status += "+splitting_suspected";
  }
  rep.field = std::move(u);
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return rep;
}

/// (u_1 - max_{j != 1} u_j)_+: the rotated copies of the result have
/// pairwise disjoint supports, so the Nehari denominator is positive for
/// every beta whenever the result is nonzero.
inline ComponentField segregate(const ComponentField& u1, int ell) {
  const auto& g = *u1.grid;
  ComponentField out(u1.grid);
  std::vector<std::size_t> shifts;
  for (int j = 1; j < ell; ++j) shifts.push_back(component_shift(j, g.m(), ell));
  for (std::size_t i = 0; i < g.nr(); ++i)
    for (std::size_t k = 0; k < g.m(); ++k)
      for (std::size_t s = 0; s < g.ns(); ++s) {
        double other = 0.0;
        for (std::size_t sh : shifts) other = std::max(other, u1(i, (k + sh) % g.m(), s));
        out(i, k, s) = std::max(u1(i, k, s) - other, 0.0);
      }
  return out;
}

/// Error raised when a continuation step fails; carries the offending beta.
class ContinuationError : public Error {
public:
  ContinuationError(double beta, const std::string& what)
      : Error("continuation failed at beta = " + std::to_string(beta) + ": " + what), beta(beta) {}
  double beta;
};

/// Warm-started solves along a strictly monotone beta schedule.
inline std::vector<SolveReport> continuation(PinwheelConfig cfg, const RadialPotential& pot,
                                             GridPtr grid, const std::vector<double>& schedule,
                                             const ComponentField& initial, SolverOptions opts = {}) {
  if (schedule.empty()) throw ConfigError("empty beta schedule");
  for (double b : schedule)
    if (!(b < 0.0)) throw ConfigError("beta schedule entries must be negative");
  if (schedule.size() > 1) {
    const bool inc = schedule[1] > schedule[0];
    for (std::size_t i = 1; i < schedule.size(); ++i)
      if ((schedule[i] > schedule[i - 1]) != inc || schedule[i] == schedule[i - 1])
        throw ConfigError("beta schedule must be strictly monotone");
  }
  std::vector<SolveReport> out;
  ComponentField start = initial;
  for (double beta : schedule) {
    cfg.beta = beta;
    try {
      // a warm start whose overlap is too large for the new beta is split first
      const EnergyModel model(cfg, grid, pot);
      if (!model.terms(start.values).admissible(beta)) start = segregate(start, cfg.ell);
      out.push_back(minimize(cfg, pot, grid, start, opts));
    } catch (const Error& e) {
      throw ContinuationError(beta, e.what());
    }
    start = out.back().field;
  }
  return out;
}

} // namespace pinwheel
