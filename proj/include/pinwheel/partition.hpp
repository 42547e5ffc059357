#pragma once
// Segregation analysis for strongly competing components: support masks,
// coverage, one-sided interface gradients and, for two components, the
// sign-changing difference u_1 - u_2.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "pinwheel/config.hpp"
#include "pinwheel/functional.hpp"
#include "pinwheel/grid.hpp"
#include "pinwheel/potential.hpp"
#include "pinwheel/solver.hpp"

namespace pinwheel {

struct PartitionResult {
  double threshold = 0.0;                  ///< relative to max u_1
  std::vector<std::vector<std::uint8_t>> masks; ///< Omega_j, one per component
  double coverage = 0.0;                   ///< measure(union Omega_j) / measure(grid domain)
  double union_measure = 0.0;
  double domain_measure = 0.0;
  std::size_t violations = 0;              ///< nodes lying in two or more masks
  std::vector<double> energies;            ///< c_{Omega_j} of the restricted, reprojected u_1
  GridPtr grid;
};

/// Omega_1 = {u_1 > threshold max u_1}, Omega_{j+1} its rotations.
inline PartitionResult extract_partition(const ComponentField& u1, const PinwheelConfig& cfg,
                                         const RadialPotential& v, double threshold = 1e-3) {
  if (!(threshold > 0.0)) throw ConfigError("partition threshold must be positive");
  const auto& g = *u1.grid;
  const double umax = *std::max_element(u1.values.begin(), u1.values.end());
  const double cut = threshold * umax;
  PartitionResult out;
  out.threshold = threshold;
  out.grid = u1.grid;
  const auto l = static_cast<std::size_t>(cfg.ell);
  std::vector<std::uint8_t> base(g.size(), 0);
  std::size_t count = 0;
  for (std::size_t x = 0; x < g.size(); ++x)
    if (u1.values[x] > cut) {
      base[x] = 1;
      ++count;
    }
  if (!(umax > 0.0) || count == 0) throw ConfigError("empty support: threshold above the field maximum");

  out.masks.resize(l);
  out.masks[0] = base;
  for (std::size_t j = 1; j < l; ++j) {
    const std::size_t sh = component_shift(static_cast<long>(j), g.m(), cfg.ell);
    auto& mk = out.masks[j];
    mk.assign(g.size(), 0);
    for (std::size_t i = 0; i < g.nr(); ++i)
      for (std::size_t k = 0; k < g.m(); ++k)
        for (std::size_t s = 0; s < g.ns(); ++s) mk[g.index(i, k, s)] = base[g.index(i, (k + sh) % g.m(), s)];
  }

  const auto w = g.weights();
  for (std::size_t x = 0; x < g.size(); ++x) {
    std::size_t hits = 0;
    for (const auto& mk : out.masks) hits += mk[x];
    out.domain_measure += w[x];
    if (hits > 0) out.union_measure += w[x];
    if (hits > 1) ++out.violations;
  }
  out.coverage = out.union_measure / out.domain_measure;

  // u_1 restricted to Omega_1 and put back on the scalar Nehari set
  ComponentField restricted(u1.grid);
  for (std::size_t x = 0; x < g.size(); ++x) restricted.values[x] = base[x] ? u1.values[x] : 0.0;
  auto scalar = PinwheelConfig::scalar(cfg.n, cfg.dim, cfg.p);
  const EnergyModel model(scalar, u1.grid, v);
  const auto t = model.terms(restricted.values);
  const double s = model.scale(t);
  const double c = (cfg.p - 1.0) / (2.0 * cfg.p) * s * s * t.quad;
  out.energies.assign(l, c);
  return out;
}

struct InterfaceRecord {
  std::size_t node_a = 0, node_b = 0; ///< adjacent nodes in Omega_i and Omega_j
  int comp_a = 0, comp_b = 0;
  double grad_a = 0.0; ///< |grad u_i| at node_a, one-sided into Omega_i
  double grad_b = 0.0; ///< |grad u_j| at node_b, one-sided into Omega_j
  double mismatch = 0.0;
  double product = 0.0; ///< max over the two nodes of u_i u_j
};

struct InterfaceSummary {
  std::vector<InterfaceRecord> records;
  double median_grad = 0.0;
  double median_mismatch = 0.0;
  double p90_mismatch = 0.0;
  double min_product = 0.0;
};

namespace detail {

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// |grad f| at (i,k,s) from first-order differences taken towards nodes of `mask`.
inline double one_sided_gradient(const PolarGrid& g, const std::vector<double>& f,
                                 const std::vector<std::uint8_t>& mask, std::size_t i, std::size_t k,
                                 std::size_t s) {
  const std::size_t m = g.m();
  const std::size_t x = g.index(i, k, s);
  auto diff = [&](bool has_fwd, std::size_t fwd, bool has_bwd, std::size_t bwd, double h) {
    if (has_fwd && mask[fwd]) return (f[fwd] - f[x]) / h;
    if (has_bwd && mask[bwd]) return (f[x] - f[bwd]) / h;
    return 0.0;
  };
  double acc = 0.0;
  const double gr = diff(i + 1 < g.nr(), i + 1 < g.nr() ? g.index(i + 1, k, s) : 0, i > 0,
                         i > 0 ? g.index(i - 1, k, s) : 0, g.dr());
  acc += gr * gr;
  if (m > 1) {
    const double ga = diff(true, g.index(i, (k + 1) % m, s), true, g.index(i, (k + m - 1) % m, s),
                           g.r(i) * g.dtheta());
    acc += ga * ga;
  }
  if (g.cylindrical()) {
    const double gs = diff(s + 1 < g.ns(), s + 1 < g.ns() ? g.index(i, k, s + 1) : 0, s > 0,
                           s > 0 ? g.index(i, k, s - 1) : 0, g.ds());
    acc += gs * gs;
  }
  return std::sqrt(acc);
}

} // namespace detail

/// One record per grid edge joining two different supports.
inline InterfaceSummary interface_diagnostics(const ComponentField& u1, const PinwheelConfig& cfg,
                                              const PartitionResult& part) {
  const auto& g = *u1.grid;
  std::vector<std::vector<double>> vals;
  for (int j = 0; j < cfg.ell; ++j)
    vals.push_back(j == 0 ? u1.values
                          : rotate_by_index(u1, component_shift(j, g.m(), cfg.ell)).values);
  auto label = [&](std::size_t x) {
    for (std::size_t j = 0; j < part.masks.size(); ++j)
      if (part.masks[j][x]) return static_cast<int>(j);
    return -1;
  };
  auto coords = [&](std::size_t x, std::size_t& i, std::size_t& k, std::size_t& s) {
    s = x % g.ns();
    const std::size_t ik = x / g.ns();
    k = ik % g.m();
    i = ik / g.m();
  };

  InterfaceSummary out;
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  detail::for_each_neighbor(g, [&](std::size_t a, std::size_t b) {
    if (b == npos) return;
    const int la = label(a), lb = label(b);
    if (la < 0 || lb < 0 || la == lb) return;
    InterfaceRecord rec;
    rec.node_a = a;
    rec.node_b = b;
    rec.comp_a = la;
    rec.comp_b = lb;
    std::size_t i, k, s;
    coords(a, i, k, s);
    rec.grad_a = detail::one_sided_gradient(g, vals[la], part.masks[la], i, k, s);
    coords(b, i, k, s);
    rec.grad_b = detail::one_sided_gradient(g, vals[lb], part.masks[lb], i, k, s);
    rec.mismatch = std::abs(rec.grad_a - rec.grad_b);
    rec.product = std::max(vals[la][a] * vals[lb][a], vals[la][b] * vals[lb][b]);
    out.records.push_back(rec);
  });

  std::vector<double> grads, mism;
  out.min_product = out.records.empty() ? 0.0 : std::numeric_limits<double>::infinity();
  for (const auto& r : out.records) {
    grads.push_back(r.grad_a);
    grads.push_back(r.grad_b);
    mism.push_back(r.mismatch);
    out.min_product = std::min(out.min_product, r.product);
  }
  out.median_grad = detail::quantile(grads, 0.5);
  out.median_mismatch = detail::quantile(mism, 0.5);
  out.p90_mismatch = detail::quantile(mism, 0.9);
  return out;
}

struct SegregationRow {
  double beta = 0.0;
  double overlap = 0.0;          ///< int u_1^p u_2^p
  double weighted = 0.0;         ///< beta * overlap
  double interface_product = 0.0; ///< min over interface edges of u_i u_j
};

struct SegregationTrace {
  std::vector<SegregationRow> rows;
  bool overlap_decreasing = true;  ///< strictly, along the schedule
  bool weighted_decreasing = true; ///< |beta O| decreasing over the last two rows
  bool trend_checked = false;
};

inline SegregationTrace segregation_trace(const std::vector<SolveReport>& reports,
                                          const RadialPotential& v, double threshold = 1e-3) {
  if (reports.empty()) throw ConfigError("segregation trace needs at least one report");
  SegregationTrace out;
  for (const auto& r : reports) {
    SegregationRow row;
    row.beta = r.config.beta;
    const auto ov = overlap(r.field, r.config);
    row.overlap = ov.overlap.size() > 1 ? ov.overlap[0][1] : 0.0;
    row.weighted = r.config.beta * row.overlap;
    const auto part = extract_partition(r.field, r.config, v, threshold);
    row.interface_product = interface_diagnostics(r.field, r.config, part).min_product;
    out.rows.push_back(row);
  }
  if (out.rows.size() >= 2) {
    out.trend_checked = true;
    for (std::size_t i = 1; i < out.rows.size(); ++i)
      if (!(out.rows[i].overlap < out.rows[i - 1].overlap)) out.overlap_decreasing = false;
    const auto& a = out.rows[out.rows.size() - 2];
    const auto& b = out.rows.back();
    out.weighted_decreasing = std::abs(b.weighted) < std::abs(a.weighted);
  }
  return out;
}

struct SignChangingResult {
  ComponentField w;                ///< u_1 - u_2
  double residual = 0.0;           ///< max |-Delta w + V w - |w|^{2p-2} w|
  double antisymmetry = 0.0;       ///< max |w(e^{i pi/n} z) + w(z)|
  double component_energy = 0.0;  ///< (p-1)/(2p)(||u_1||^2 + ||u_2||^2)
  double scalar_energy = 0.0;      ///< J(u_1 - u_2)
  double identity_error = 0.0;     ///< relative difference of the two energies
};

inline SignChangingResult sign_changing(const ComponentField& u1, const PinwheelConfig& cfg,
                                        const RadialPotential& v) {
  if (cfg.ell != 2) throw ConfigError("sign-changing correspondence needs ell = 2");
  const auto& g = *u1.grid;
  SignChangingResult out;
  const auto u2 = rotate_by_index(u1, component_shift(1, g.m(), 2));
  out.w = ComponentField(u1.grid);
  for (std::size_t x = 0; x < g.size(); ++x) out.w.values[x] = u1.values[x] - u2.values[x];

  const auto pot = sample_potential(g, v);
  std::vector<double> lap(g.size(), 0.0);
  add_neg_laplacian(out.w.values, g, lap);
  const double p = cfg.p;
  for (std::size_t x = 0; x < g.size(); ++x) {
    const double wx = out.w.values[x];
    const double r = lap[x] + pot[x] * wx - std::pow(std::abs(wx), 2.0 * p - 2.0) * wx;
    out.residual = std::max(out.residual, std::abs(r));
  }
  // rotation by pi/n is the shift by m/2
  const auto rw = rotate_by_index(out.w, g.m() / 2);
  for (std::size_t x = 0; x < g.size(); ++x)
    out.antisymmetry = std::max(out.antisymmetry, std::abs(rw.values[x] + out.w.values[x]));

  const double q1 = inner_product_V(u1, u1, pot), q2 = inner_product_V(u2, u2, pot);
  out.component_energy = (p - 1.0) / (2.0 * p) * (q1 + q2);
  double self = 0.0;
  const auto wts = g.weights();
  for (std::size_t x = 0; x < g.size(); ++x) self += wts[x] * std::pow(std::abs(out.w.values[x]), 2.0 * p);
  out.scalar_energy = 0.5 * inner_product_V(out.w, out.w, pot) - self / (2.0 * p);
  const double scale = std::max(std::abs(out.component_energy), std::numeric_limits<double>::min());
  out.identity_error = std::abs(out.component_energy - out.scalar_energy) / scale;
  return out;
}

} // namespace pinwheel
