#pragma once
// Equivariant energy of the pinwheel system, evaluated on the stored
// component u_1 alone. With u_{j+1} = u_1 rotated by 2*pi*j/(ell n),
//
//   J(u) = ell * (Q/2 - P/(2p)) - (beta/(2p)) * ell * sum_j C_j,
//   Q = <u_1,u_1>_V,  P = int |u_1|^{2p},  C_j = int |u_1|^p |u_{j+1}|^p,
//
// and the derivative along equivariant directions is ell times the
// component-1 partial derivative.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "pinwheel/config.hpp"
#include "pinwheel/grid.hpp"
#include "pinwheel/potential.hpp"

namespace pinwheel {

/// Component-1 integrals that determine energy, Nehari residual and scale.
struct NehariTerms {
  double quad = 0.0;              ///< <u_1, u_1>_V
  double self = 0.0;              ///< int |u_1|^{2p}
  std::vector<double> coupling;   ///< C_j = int |u_1|^p |u_{j+1}|^p, j = 1..ell-1

  double coupling_sum() const {
    double s = 0.0;
    for (double c : coupling) s += c;
    return s;
  }
  double denominator(double beta) const { return self + beta * coupling_sum(); }
  /// Positive denominator beyond the rounding of the sum that forms it.
  bool admissible(double beta) const {
    const double d = denominator(beta);
    return d > 16.0 * std::numeric_limits<double>::epsilon() * (self + std::abs(beta) * coupling_sum());
  }
};

struct EnergyBreakdown {
  double total = 0.0;
  std::vector<double> quadratic;            ///< ||u_i||_V^2 per component
  std::vector<double> self;                 ///< int |u_i|^{2p} per component
  std::vector<std::vector<double>> coupling; ///< int |u_i|^p |u_j|^p, zero diagonal
};

struct OverlapMatrix {
  std::vector<std::vector<double>> overlap;  ///< O_ij, i != j
  std::vector<std::vector<double>> weighted; ///< beta * O_ij
};

class EnergyModel {
public:
  EnergyModel(const PinwheelConfig& cfg, GridPtr grid, const RadialPotential& pot)
      : EnergyModel(cfg, grid, sample_potential(*grid, pot)) {}

  EnergyModel(const PinwheelConfig& cfg, GridPtr grid, std::vector<double> pot_nodes)
      : cfg_(cfg), grid_(std::move(grid)), pot_(std::move(pot_nodes)) {
    if (grid_->n() != cfg_.n) throw ConfigError("grid and config disagree on n");
    if (grid_->dim() != cfg_.dim) throw ConfigError("grid and config disagree on dim");
    if (pot_.size() != grid_->size()) throw GridMismatch("potential samples do not match grid");
    shifts_.reserve(static_cast<std::size_t>(std::max(cfg_.ell - 1, 0)));
    for (int j = 1; j < cfg_.ell; ++j) shifts_.push_back(component_shift(j, grid_->m(), cfg_.ell));
  }

  const PinwheelConfig& config() const { return cfg_; }
  const GridPtr& grid() const { return grid_; }
  std::span<const double> potential() const { return pot_; }
  double p() const { return cfg_.p; }
  double beta() const { return cfg_.beta; }
  int ell() const { return cfg_.ell; }
  std::span<const std::size_t> shifts() const { return shifts_; }

  /// |u|^p and sign(u)|u|^{p-1} (the latter 0 at u = 0).
  void powers(std::span<const double> u, std::vector<double>& a, std::vector<double>& b) const {
    a.resize(u.size());
    b.resize(u.size());
    const double p = cfg_.p;
    if (p == 2.0) {
      for (std::size_t x = 0; x < u.size(); ++x) {
        b[x] = u[x];
        a[x] = u[x] * u[x];
      }
      return;
    }
    for (std::size_t x = 0; x < u.size(); ++x) {
      const double m = std::abs(u[x]);
      const double q = m > 0.0 ? std::pow(m, p - 1.0) : 0.0;
      b[x] = std::copysign(q, u[x]) * (m > 0.0 ? 1.0 : 0.0);
      a[x] = m * q;
    }
  }

  /// Per node: sum over j = 1..ell-1 of a at the rotated node.
  void coupling_field(std::span<const double> a, std::vector<double>& out) const {
    const auto& g = *grid_;
    out.assign(a.size(), 0.0);
    const std::size_t m = g.m(), ns = g.ns();
    for (std::size_t sh : shifts_)
      for (std::size_t i = 0; i < g.nr(); ++i)
        for (std::size_t k = 0; k < m; ++k) {
          const std::size_t dst = g.index(i, k), src = g.index(i, (k + sh) % m);
          for (std::size_t j = 0; j < ns; ++j) out[dst + j] += a[src + j];
        }
  }

  NehariTerms terms(std::span<const double> u) const {
    std::vector<double> a, b;
    powers(u, a, b);
    return terms(u, a);
  }

  NehariTerms terms(std::span<const double> u, std::span<const double> a) const {
    const auto& g = *grid_;
    const auto w = g.weights();
    const std::size_t nr = g.nr(), m = g.m(), ns = g.ns();
    NehariTerms t;
    t.coupling.assign(shifts_.size(), 0.0);
    std::vector<double> bq(m), bp(m), bc(m), ang(m);
    detail::RingKernel ring(g);
    // per-node contributions; each node owns its outgoing radial, angular and axial edges
    for (std::size_t i = 0; i < nr; ++i)
      for (std::size_t j = 0; j < ns; ++j) {
        const double cr = g.radial_edge(i, j), ca = g.angular_edge(i, j), cs = g.axial_edge(i, j);
        ring.load(u, i, j);
        std::fill(ang.begin(), ang.end(), 0.0);
        ring.add_energy(ang);
        for (std::size_t k = 0; k < m; ++k) {
          const std::size_t x = g.index(i, k, j);
          const double ux = u[x];
          const double dr = ux - (i + 1 < nr ? u[g.index(i + 1, k, j)] : 0.0);
          double q = cr * (dr * dr) + w[x] * (pot_[x] * (ux * ux)) + ca * ang[k];
          if (g.cylindrical()) {
            const double ds = ux - (j + 1 < ns ? u[g.index(i, k, j + 1)] : 0.0);
            q += cs * (ds * ds);
          }
          bq[k] = q;
          bp[k] = w[x] * (a[x] * a[x]);
        }
        t.quad += detail::ring_sum(bq);
        t.self += detail::ring_sum(bp);
        for (std::size_t c = 0; c < shifts_.size(); ++c) {
          for (std::size_t k = 0; k < m; ++k) {
            const std::size_t x = g.index(i, k, j), y = g.index(i, (k + shifts_[c]) % m, j);
            bc[k] = w[x] * (a[x] * a[y]);
          }
          t.coupling[c] += detail::ring_sum(bc);
        }
      }
    return t;
  }

  double energy(const NehariTerms& t) const {
    const double p = cfg_.p, l = cfg_.ell;
    return l * (0.5 * t.quad - t.self / (2.0 * p)) - cfg_.beta / (2.0 * p) * l * t.coupling_sum();
  }

  double energy(std::span<const double> u) const { return energy(terms(u)); }

  /// Component-1 Nehari residual |Q - P - beta sum_j C_j|.
  double residual(const NehariTerms& t) const { return std::abs(t.quad - t.denominator(cfg_.beta)); }

  /// Nehari scale s_u; throws NonpositiveDenominator when it does not exist.
  double scale(const NehariTerms& t) const {
    const double d = t.denominator(cfg_.beta);
    if (!t.admissible(cfg_.beta)) throw NonpositiveDenominator(d);
    return std::pow(t.quad / d, 1.0 / (2.0 * cfg_.p - 2.0));
  }

  /// J(s_u u) = ell (p-1)/(2p) s_u^2 Q, the maximum of J along the ray.
  double projected_energy(const NehariTerms& t) const {
    const double s = scale(t);
    return cfg_.ell * (cfg_.p - 1.0) / (2.0 * cfg_.p) * s * s * t.quad;
  }

  /// Weighted-L2 representer of v -> d_1 J(u) v.
  void gradient(std::span<const double> u, std::span<double> out) const {
    std::vector<double> a, b, c;
    powers(u, a, b);
    coupling_field(a, c);
    std::fill(out.begin(), out.end(), 0.0);
    add_neg_laplacian(u, *grid_, out);
    const double beta = cfg_.beta;
    for (std::size_t x = 0; x < u.size(); ++x)
      out[x] += pot_[x] * u[x] - a[x] * b[x] - beta * c[x] * b[x];
  }

  std::vector<double> gradient(std::span<const double> u) const {
    std::vector<double> g(u.size());
    gradient(u, g);
    return g;
  }

  EnergyBreakdown breakdown(std::span<const double> u) const {
    const auto t = terms(u);
    EnergyBreakdown out;
    out.total = energy(t);
    const auto l = static_cast<std::size_t>(cfg_.ell);
    out.quadratic.assign(l, t.quad);
    out.self.assign(l, t.self);
    out.coupling = overlap_from_terms(t);
    return out;
  }

  /// O_ij = C_{j-i} for i < j, mirrored so the matrix is exactly symmetric.
  std::vector<std::vector<double>> overlap_from_terms(const NehariTerms& t) const {
    const auto l = static_cast<std::size_t>(cfg_.ell);
    std::vector<std::vector<double>> o(l, std::vector<double>(l, 0.0));
    for (std::size_t i = 0; i < l; ++i)
      for (std::size_t j = i + 1; j < l; ++j) o[i][j] = o[j][i] = t.coupling[j - i - 1];
    return o;
  }

private:
  PinwheelConfig cfg_;
  GridPtr grid_;
  std::vector<double> pot_;
  std::vector<std::size_t> shifts_;
};

// Free-function surface over a single evaluation.

inline EnergyBreakdown energy_J(const ComponentField& u1, const PinwheelConfig& cfg,
                                const RadialPotential& v) {
  return EnergyModel(cfg, u1.grid, v).breakdown(u1.values);
}

inline ComponentField gradient_J(const ComponentField& u1, const PinwheelConfig& cfg,
                                 const RadialPotential& v) {
  ComponentField g(u1.grid);
  EnergyModel(cfg, u1.grid, v).gradient(u1.values, g.values);
  return g;
}

inline double nehari_scalar(const ComponentField& u1, const PinwheelConfig& cfg,
                            const RadialPotential& v) {
  if (std::all_of(u1.values.begin(), u1.values.end(), [](double x) { return x == 0.0; }))
    throw NonpositiveDenominator(0.0);
  const EnergyModel model(cfg, u1.grid, v);
  return model.scale(model.terms(u1.values));
}

inline double nehari_residual(const ComponentField& u1, const PinwheelConfig& cfg,
                              const RadialPotential& v) {
  const EnergyModel model(cfg, u1.grid, v);
  return model.residual(model.terms(u1.values));
}

/// (p-1)/(2p) ||u_1||_V^2.
inline double component_energy(const ComponentField& u1, const PinwheelConfig& cfg,
                               const RadialPotential& v) {
  return (cfg.p - 1.0) / (2.0 * cfg.p) * inner_product_V(u1, u1, v);
}

inline OverlapMatrix overlap(const ComponentField& u1, const PinwheelConfig& cfg) {
  // the potential does not enter the coupling integrals
  const EnergyModel model(cfg, u1.grid, std::vector<double>(u1.size(), 0.0));
  OverlapMatrix out;
  out.overlap = model.overlap_from_terms(model.terms(u1.values));
  out.weighted = out.overlap;
  for (auto& row : out.weighted)
    for (double& x : row) x *= cfg.beta;
  return out;
}

/// Nehari-projected copy s_u u.
inline ComponentField project_to_nehari(const ComponentField& u1, const PinwheelConfig& cfg,
                                        const RadialPotential& v) {
  const double s = nehari_scalar(u1, cfg, v);
  ComponentField out = u1;
  for (double& x : out.values) x *= s;
  return out;
}

} // namespace pinwheel
