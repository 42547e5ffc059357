#pragma once
// Polar discretisation of the symmetry-reduced domain.
//
// Radial nodes sit at r_i = (i + 1/2) dr, i = 0..nr-1, with a homogeneous
// Dirichlet node at r_nr = R_max; no node lies on the pole, where the
// r-weighted flux vanishes. The angular grid covers one period 2*pi/n with m
// nodes; quadrature weights carry the full-circle multiplicity n. For
// dim >= 4 a second cell-centred axis s = |y| on [0, S_max] carries the
// measure |S^{N-3}| s^{N-3} ds, again with a Dirichlet node at S_max.
//
// Every discrete operator derives from one quadratic form
//   Q(u) = sum_edges a_e (u_a - u_b)^2 + sum_x w_x V_x u_x^2,
// so the Laplacian is exactly (minus) the weighted-L2 representer of the
// gradient part of Q.
//
// Along a ring the edges are either the nearest-neighbour pairs of the
// central second difference, or all pairs (k, k+d) with the weights of the
// Fourier-spectral second derivative (symbol q^2 instead of 4 sin^2(q h/2)/h^2).
// The spectral form does not underestimate the angular gradient energy of
// coarsely resolved bumps, which otherwise pulls off-centre solutions toward
// large radii where the ring spacing is widest.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "pinwheel/config.hpp"
#include "pinwheel/potential.hpp"
#include "pinwheel/symmetry.hpp"

namespace pinwheel {

enum class AngularStencil { Central, Spectral };

/// Ring pair at index distance d with its weight relative to the angular edge coefficient.
struct AngularPair {
  std::size_t distance;
  double weight;
};

class PolarGrid {
public:
  PolarGrid(std::size_t nr, std::size_t m, double r_max, const PinwheelConfig& cfg,
            std::size_t ns = 1, double s_max = 0.0, AngularStencil stencil = AngularStencil::Spectral)
      : nr_(nr), m_(m), ns_(ns), r_max_(r_max), s_max_(s_max), ell_(cfg.ell), n_(cfg.n),
        dim_(cfg.dim), stencil_(stencil) {
    if (nr < 8) throw ConfigError("grid needs at least 8 radial nodes");
    if (m == 0) throw ConfigError("grid needs at least one angular node");
    if (!(r_max > 0.0)) throw ConfigError("R_max must be positive");
    if (cfg.ell < 1 || m % static_cast<std::size_t>(cfg.ell) != 0)
      throw ConfigError("angular node count " + std::to_string(m) +
                        " is not divisible by ell = " + std::to_string(cfg.ell));
    if (cfg.n < 1) throw ConfigError("n must be >= 1");
    if (dim_ == 2) {
      if (ns != 1) throw ConfigError("dim 2 grids have no s-axis (ns must be 1)");
    } else if (dim_ >= 4) {
      if (ns < 2) throw ConfigError("cylindrical grids need ns >= 2");
      if (s_max_ <= 0.0) s_max_ = r_max;
    } else {
      throw ConfigError("polar grids support dim 2 or >= 4");
    }

    dr_ = r_max_ / (static_cast<double>(nr_) + 0.5);
    dth_ = 2.0 * std::numbers::pi / (static_cast<double>(n_) * static_cast<double>(m_));
    r_.resize(nr_);
    for (std::size_t i = 0; i < nr_; ++i) r_[i] = (static_cast<double>(i) + 0.5) * dr_;

    // s-axis measure per node and per outgoing s-edge
    s_.assign(ns_, 0.0);
    s_node_.assign(ns_, 1.0);
    s_edge_.assign(ns_, 0.0);
    if (dim_ >= 4) {
      ds_ = s_max_ / (static_cast<double>(ns_) + 0.5);
      const double area = sphere_area(dim_ - 2);
      const int e = dim_ - 3;
      for (std::size_t j = 0; j < ns_; ++j) {
        s_[j] = (static_cast<double>(j) + 0.5) * ds_;
        s_node_[j] = area * std::pow(s_[j], e) * ds_;
        s_edge_[j] = area * std::pow(s_[j] + 0.5 * ds_, e) / ds_;
      }
    }

    build_angular_pairs();

    const double nf = static_cast<double>(n_);
    weight_.resize(size());
    radial_edge_.resize(nr_ * ns_);
    angular_edge_.resize(nr_ * ns_);
    axial_edge_.resize(nr_ * ns_);
    for (std::size_t i = 0; i < nr_; ++i) {
      const double r_half = r_[i] + 0.5 * dr_;
      for (std::size_t j = 0; j < ns_; ++j) {
        radial_edge_[i * ns_ + j] = nf * r_half * dth_ * s_node_[j] / dr_;
        angular_edge_[i * ns_ + j] = m_ > 1 ? nf * dr_ / (r_[i] * dth_) * s_node_[j] : 0.0;
        axial_edge_[i * ns_ + j] = nf * r_[i] * dr_ * dth_ * s_edge_[j];
        const double w = nf * r_[i] * dr_ * dth_ * s_node_[j];
        for (std::size_t k = 0; k < m_; ++k) weight_[index(i, k, j)] = w;
      }
    }
  }

  std::size_t nr() const { return nr_; }
  std::size_t m() const { return m_; }
  std::size_t ns() const { return ns_; }
  std::size_t size() const { return nr_ * m_ * ns_; }
  double r_max() const { return r_max_; }
  double s_max() const { return s_max_; }
  double dr() const { return dr_; }
  double dtheta() const { return dth_; }
  double ds() const { return ds_; }
  int ell() const { return ell_; }
  int n() const { return n_; }
  int dim() const { return dim_; }
  bool cylindrical() const { return dim_ >= 4; }

  std::size_t index(std::size_t i, std::size_t k, std::size_t j = 0) const {
    return (i * m_ + k) * ns_ + j;
  }
  double r(std::size_t i) const { return r_[i]; }
  double theta(std::size_t k) const { return static_cast<double>(k) * dth_; }
  double s(std::size_t j) const { return s_[j]; }
  /// Euclidean norm |x| of a node.
  double radius(std::size_t i, std::size_t j = 0) const {
    return dim_ >= 4 ? std::hypot(r_[i], s_[j]) : r_[i];
  }

  AngularStencil stencil() const { return stencil_; }
  /// Pairs visited from every ring node; each unordered pair is covered once in total.
  std::span<const AngularPair> angular_pairs() const { return pairs_; }
  /// Eigenvalue of the ring form (per unit angular edge coefficient) for DFT mode q.
  double angular_symbol(std::size_t q) const {
    double acc = 0.0;
    for (const auto& pr : pairs_) {
      const double ph = 2.0 * std::numbers::pi * static_cast<double>(q * pr.distance % m_) / static_cast<double>(m_);
      acc += pr.weight * (2.0 - 2.0 * std::cos(ph));
    }
    return acc;
  }

  std::span<const double> weights() const { return weight_; }
  double radial_edge(std::size_t i, std::size_t j = 0) const { return radial_edge_[i * ns_ + j]; }
  double angular_edge(std::size_t i, std::size_t j = 0) const { return angular_edge_[i * ns_ + j]; }
  double axial_edge(std::size_t i, std::size_t j = 0) const { return axial_edge_[i * ns_ + j]; }

  /// Measure of the truncated domain (exact for the continuous region).
  double domain_measure() const {
    if (dim_ == 2) return std::numbers::pi * r_max_ * r_max_;
    const double d = dim_ - 2;
    return std::numbers::pi * r_max_ * r_max_ * sphere_area(dim_ - 2) * std::pow(s_max_, d) / d;
  }

  /// Angular index shift of component j+1 relative to component 1.
  std::size_t shift_of(long j) const { return component_shift(j, m_, ell_); }

  bool operator==(const PolarGrid& o) const {
    return nr_ == o.nr_ && m_ == o.m_ && ns_ == o.ns_ && r_max_ == o.r_max_ &&
           s_max_ == o.s_max_ && ell_ == o.ell_ && n_ == o.n_ && dim_ == o.dim_ &&
           stencil_ == o.stencil_;
  }

private:
  void build_angular_pairs() {
    pairs_.clear();
    if (m_ < 2) return;
    if (stencil_ == AngularStencil::Central) {
      pairs_.push_back({1, m_ == 2 ? 0.5 : 1.0});
      return;
    }
    // off-diagonal entries c_d of the circulant with symbol (2 pi qt/m)^2,
    // qt = min(q, m - q); the pair weight is -c_d
    const std::size_t m = m_;
    const long double two_pi = 2.0L * std::numbers::pi_v<long double>;
    for (std::size_t d = 1; d <= m / 2; ++d) {
      long double c = 0.0L;
      for (std::size_t q = 0; q < m; ++q) {
        const auto qt = static_cast<long double>(std::min(q, m - q));
        const long double mu = (two_pi * qt / m) * (two_pi * qt / m);
        c += mu * std::cos(two_pi * static_cast<long double>(q * d % m) / m);
      }
      c /= static_cast<long double>(m);
      double wgt = -static_cast<double>(c);
      if (2 * d == m) wgt *= 0.5; // visited from both ends
      pairs_.push_back({d, wgt});
    }
  }

  std::size_t nr_, m_, ns_;
  double r_max_, s_max_;
  int ell_, n_, dim_;
  AngularStencil stencil_;
  std::vector<AngularPair> pairs_;
  double dr_ = 0.0, dth_ = 0.0, ds_ = 0.0;
  std::vector<double> r_, s_, s_node_, s_edge_;
  std::vector<double> weight_, radial_edge_, angular_edge_, axial_edge_;
};

using GridPtr = std::shared_ptr<const PolarGrid>;

inline GridPtr build_grid(std::size_t nr, std::size_t m, double r_max, const PinwheelConfig& cfg,
                          std::size_t ns = 1, double s_max = 0.0,
                          AngularStencil stencil = AngularStencil::Spectral) {
  return std::make_shared<const PolarGrid>(nr, m, r_max, cfg, ns, s_max, stencil);
}

/// Values of u_1 on the grid; the other components are angular shifts.
struct ComponentField {
  GridPtr grid;
  std::vector<double> values;

  ComponentField() = default;
  explicit ComponentField(GridPtr g) : grid(std::move(g)), values(grid->size(), 0.0) {}
  ComponentField(GridPtr g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid->size()) throw GridMismatch("value count does not match grid");
  }

  double& operator()(std::size_t i, std::size_t k, std::size_t j = 0) {
    return values[grid->index(i, k, j)];
  }
  double operator()(std::size_t i, std::size_t k, std::size_t j = 0) const {
    return values[grid->index(i, k, j)];
  }
  std::size_t size() const { return values.size(); }

  /// Fills from f(x, y, s) in Cartesian coordinates of the distinguished plane.
  template <class F> static ComponentField sample(GridPtr g, F&& f) {
    ComponentField out(g);
    for (std::size_t i = 0; i < g->nr(); ++i)
      for (std::size_t k = 0; k < g->m(); ++k) {
        const double th = g->theta(k);
        const double x = g->r(i) * std::cos(th), y = g->r(i) * std::sin(th);
        for (std::size_t j = 0; j < g->ns(); ++j) out(i, k, j) = f(x, y, g->cylindrical() ? g->s(j) : 0.0);
      }
    return out;
  }
};

inline bool same_grid(const ComponentField& a, const ComponentField& b) {
  return a.grid && b.grid && (a.grid == b.grid || *a.grid == *b.grid);
}

inline void require_same_grid(const ComponentField& a, const ComponentField& b) {
  if (!same_grid(a, b)) throw GridMismatch("fields live on different grids");
}

/// Rotation of u by an angular index shift: out(i,k,j) = u(i,k+shift,j).
inline ComponentField rotate_by_index(const ComponentField& u, std::size_t shift) {
  const auto& g = *u.grid;
  ComponentField out(u.grid);
  const std::size_t m = g.m(), ns = g.ns();
  for (std::size_t i = 0; i < g.nr(); ++i)
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t src = (k + shift) % m;
      std::copy_n(u.values.begin() + static_cast<std::ptrdiff_t>(g.index(i, src)), ns,
                  out.values.begin() + static_cast<std::ptrdiff_t>(g.index(i, k)));
    }
  return out;
}

/// Component j+1 of the pinwheel tuple generated by u_1.
inline ComponentField component(const ComponentField& u1, int j) {
  return rotate_by_index(u1, u1.grid->shift_of(j));
}

/// Potential sampled at the grid nodes.
inline std::vector<double> sample_potential(const PolarGrid& g, const RadialPotential& v) {
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.nr(); ++i)
    for (std::size_t j = 0; j < g.ns(); ++j) {
      const double val = evaluate(v, g.radius(i, j));
      for (std::size_t k = 0; k < g.m(); ++k) out[g.index(i, k, j)] = val;
    }
  return out;
}

namespace detail {

/// Sum of a ring's per-node contributions in sorted order, so that the
/// result does not depend on where the ring starts (exact rotation invariance).
inline double ring_sum(std::vector<double>& buf) {
  std::sort(buf.begin(), buf.end());
  double acc = 0.0;
  for (double v : buf) acc += v;
  return acc;
}

} // namespace detail

inline double integrate(const ComponentField& f) {
  const auto& g = *f.grid;
  const auto w = g.weights();
  std::vector<double> buf(g.m());
  double acc = 0.0;
  for (std::size_t i = 0; i < g.nr(); ++i)
    for (std::size_t j = 0; j < g.ns(); ++j) {
      for (std::size_t k = 0; k < g.m(); ++k) {
        const std::size_t x = g.index(i, k, j);
        buf[k] = w[x] * f.values[x];
      }
      acc += detail::ring_sum(buf);
    }
  return acc;
}

namespace detail {

/// Visits every edge (a, b, coefficient); b == npos marks the Dirichlet node.
template <class Visit> void for_each_edge(const PolarGrid& g, Visit&& visit) {
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  const std::size_t nr = g.nr(), m = g.m(), ns = g.ns();
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t j = 0; j < ns; ++j) {
        const std::size_t a = g.index(i, k, j);
        visit(a, i + 1 < nr ? g.index(i + 1, k, j) : npos, g.radial_edge(i, j));
        const double ca = g.angular_edge(i, j);
        for (const auto& pr : g.angular_pairs()) visit(a, g.index(i, (k + pr.distance) % m, j), ca * pr.weight);
        if (g.cylindrical()) visit(a, j + 1 < ns ? g.index(i, k, j + 1) : npos, g.axial_edge(i, j));
      }
    }
}

/// Visits the radial and axial edges only; rings are handled by RingKernel.
template <class Visit> void for_each_lattice_edge(const PolarGrid& g, Visit&& visit) {
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  const std::size_t nr = g.nr(), m = g.m(), ns = g.ns();
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t j = 0; j < ns; ++j) {
        const std::size_t a = g.index(i, k, j);
        visit(a, i + 1 < nr ? g.index(i + 1, k, j) : npos, g.radial_edge(i, j));
        if (g.cylindrical()) visit(a, j + 1 < ns ? g.index(i, k, j + 1) : npos, g.axial_edge(i, j));
      }
}

/// Ring part of the form, evaluated on a periodically extended copy of one ring.
/// Every node's value is computed with the same operation sequence, so a cyclic
/// shift of the input shifts the output bit for bit.
class RingKernel {
public:
  explicit RingKernel(const PolarGrid& g) : g_(g), m_(g.m()), ext_(3 * g.m()), ext2_(3 * g.m()) {}

  /// Loads ring (i, j) of u.
  void load(std::span<const double> u, std::size_t i, std::size_t j) { gather(u, i, j, ext_); }
  void load_second(std::span<const double> v, std::size_t i, std::size_t j) { gather(v, i, j, ext2_); }

  /// e_k += sum_d w_d (x_k - x_{k+d})^2
  void add_energy(std::span<double> e) const {
    const double* x = ext_.data() + m_;
    for (const auto& pr : g_.angular_pairs()) {
      const double wd = pr.weight;
      const double* xd = x + pr.distance;
      for (std::size_t k = 0; k < m_; ++k) {
        const double t = x[k] - xd[k];
        e[k] += wd * (t * t);
      }
    }
  }

  /// e_k += sum_d w_d (x_k - x_{k+d})(y_k - y_{k+d}) for the two loaded rings.
  void add_cross(std::span<double> e) const {
    const double* x = ext_.data() + m_;
    const double* y = ext2_.data() + m_;
    for (const auto& pr : g_.angular_pairs()) {
      const double wd = pr.weight;
      const double *xd = x + pr.distance, *yd = y + pr.distance;
      for (std::size_t k = 0; k < m_; ++k) e[k] += wd * ((x[k] - xd[k]) * (y[k] - yd[k]));
    }
  }

  /// y_k += sum_d w_d ((x_k - x_{k+d}) + (x_k - x_{k-d}))
  void add_apply(std::span<double> y) const {
    const double* x = ext_.data() + m_;
    for (const auto& pr : g_.angular_pairs()) {
      const double wd = pr.weight;
      const double *xp = x + pr.distance, *xm = x - pr.distance;
      for (std::size_t k = 0; k < m_; ++k) y[k] += wd * ((x[k] - xp[k]) + (x[k] - xm[k]));
    }
  }

private:
  void gather(std::span<const double> u, std::size_t i, std::size_t j, std::vector<double>& ext) const {
    for (std::size_t k = 0; k < m_; ++k) {
      const double val = u[g_.index(i, k, j)];
      ext[k] = val;
      ext[k + m_] = val;
      ext[k + 2 * m_] = val;
    }
  }

  const PolarGrid& g_;
  std::size_t m_;
  std::vector<double> ext_, ext2_;
};

/// Visits nearest-neighbour lattice pairs (a, b) once each; b == npos marks the boundary.
template <class Visit> void for_each_neighbor(const PolarGrid& g, Visit&& visit) {
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  const std::size_t nr = g.nr(), m = g.m(), ns = g.ns();
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t kp = (k + 1) % m;
      for (std::size_t j = 0; j < ns; ++j) {
        const std::size_t a = g.index(i, k, j);
        visit(a, i + 1 < nr ? g.index(i + 1, k, j) : npos);
        if (m > 2 || (m == 2 && k == 0)) visit(a, g.index(i, kp, j));
        if (g.cylindrical()) visit(a, j + 1 < ns ? g.index(i, k, j + 1) : npos);
      }
    }
}

} // namespace detail

/// Gradient part of <u, v>_V: sum over edges of a_e (u_a - u_b)(v_a - v_b).
inline double gradient_form(std::span<const double> u, std::span<const double> v, const PolarGrid& g) {
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  double acc = 0.0;
  detail::for_each_lattice_edge(g, [&](std::size_t a, std::size_t b, double c) {
    const double du = b == npos ? u[a] : u[a] - u[b];
    const double dv = b == npos ? v[a] : v[a] - v[b];
    acc += c * (du * dv);
  });
  detail::RingKernel ring(g);
  std::vector<double> e(g.m());
  for (std::size_t i = 0; i < g.nr(); ++i)
    for (std::size_t j = 0; j < g.ns(); ++j) {
      ring.load(u, i, j);
      ring.load_second(v, i, j);
      std::fill(e.begin(), e.end(), 0.0);
      ring.add_cross(e);
      double s = 0.0;
      for (double x : e) s += x;
      acc += g.angular_edge(i, j) * s;
    }
  return acc;
}

/// Accumulates (-Delta_h u) into out, i.e. out_x += (1/w_x) sum_e a_e (u_x - u_other).
inline void add_neg_laplacian(std::span<const double> u, const PolarGrid& g, std::span<double> out) {
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  const auto w = g.weights();
  detail::for_each_lattice_edge(g, [&](std::size_t a, std::size_t b, double c) {
    if (b == npos) {
      out[a] += c * u[a] / w[a];
      return;
    }
    const double flux = c * (u[a] - u[b]);
    out[a] += flux / w[a];
    out[b] -= flux / w[b];
  });
  detail::RingKernel ring(g);
  std::vector<double> y(g.m());
  for (std::size_t i = 0; i < g.nr(); ++i)
    for (std::size_t j = 0; j < g.ns(); ++j) {
      ring.load(u, i, j);
      std::fill(y.begin(), y.end(), 0.0);
      ring.add_apply(y);
      const double ca = g.angular_edge(i, j);
      for (std::size_t k = 0; k < g.m(); ++k) {
        const std::size_t x = g.index(i, k, j);
        out[x] += ca * y[k] / w[x];
      }
    }
}

/// Discrete Laplacian with Dirichlet data at R_max (and S_max).
inline ComponentField laplacian(const ComponentField& f) {
  ComponentField out(f.grid);
  add_neg_laplacian(f.values, *f.grid, out.values);
  for (double& x : out.values) x = -x;
  return out;
}

/// Discrete <u, v>_V with node-sampled potential values.
inline double inner_product_V(const ComponentField& u, const ComponentField& v,
                              std::span<const double> pot) {
  require_same_grid(u, v);
  const auto& g = *u.grid;
  const auto w = g.weights();
  double acc = gradient_form(u.values, v.values, g);
  for (std::size_t x = 0; x < u.size(); ++x) acc += w[x] * (pot[x] * (u.values[x] * v.values[x]));
  return acc;
}

inline double inner_product_V(const ComponentField& u, const ComponentField& v, const RadialPotential& pot) {
  require_same_grid(u, v);
  return inner_product_V(u, v, sample_potential(*u.grid, pot));
}

} // namespace pinwheel
