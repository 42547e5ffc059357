#pragma once
// Fast solver for the stiffness matrix of -Delta_h + sigma on the polar grid.
//
// The grid form separates: a circulant angular part (diagonalised by a real
// FFT), a generalised eigenbasis along s, and a tridiagonal radial part per
// (angular mode, s mode). Used as the descent metric of the solver.

#include <fftw3.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include "pinwheel/grid.hpp"

namespace pinwheel {

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

} // namespace detail

/// Solves K x = b where K is the matrix of the form
///   sum_edges a_e (u_a - u_b)^2 + sigma sum_x w_x u_x^2.
class StiffnessSolver {
public:
  StiffnessSolver(GridPtr grid, double sigma) : grid_(std::move(grid)), sigma_(sigma) {
    const auto& g = *grid_;
    if (!(sigma > 0.0)) throw ConfigError("stiffness shift must be positive");
    nr_ = g.nr();
    m_ = g.m();
    ns_ = g.ns();
    modes_ = m_ / 2 + 1;

    // radial factors at s-node 0; the s-dependence is a common factor s_node_j
    const auto w = g.weights();
    wr_.resize(nr_);
    cr_.resize(nr_);
    ca_.resize(nr_);
    const double s0 = w[g.index(0, 0, 0)] / (static_cast<double>(g.n()) * g.r(0) * g.dr() * g.dtheta());
    for (std::size_t i = 0; i < nr_; ++i) {
      wr_[i] = w[g.index(i, 0, 0)] / s0;
      cr_[i] = g.radial_edge(i, 0) / s0;
      ca_[i] = g.angular_edge(i, 0) / s0;
    }
    lam_.resize(modes_);
    for (std::size_t q = 0; q < modes_; ++q) lam_[q] = g.angular_symbol(q);

    // generalised eigenproblem Ks phi = mu S phi along s
    mu_.assign(ns_, 0.0);
    phi_ = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(ns_), static_cast<Eigen::Index>(ns_));
    if (ns_ > 1) {
      std::vector<double> sn(ns_), se(ns_);
      for (std::size_t j = 0; j < ns_; ++j) {
        sn[j] = w[g.index(0, 0, j)] / wr_[0];
        se[j] = g.axial_edge(0, j) / wr_[0];
      }
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ns_), static_cast<Eigen::Index>(ns_));
      for (std::size_t j = 0; j < ns_; ++j) {
        const auto a = static_cast<Eigen::Index>(j);
        t(a, a) += se[j];
        if (j + 1 < ns_) {
          t(a + 1, a + 1) += se[j];
          t(a, a + 1) -= se[j];
          t(a + 1, a) -= se[j];
        }
      }
      Eigen::VectorXd isq(static_cast<Eigen::Index>(ns_));
      for (std::size_t j = 0; j < ns_; ++j) isq(static_cast<Eigen::Index>(j)) = 1.0 / std::sqrt(sn[j]);
      const Eigen::MatrixXd sym = isq.asDiagonal() * t * isq.asDiagonal();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
      phi_ = isq.asDiagonal() * es.eigenvectors(); // phi^T S phi = I
      for (std::size_t j = 0; j < ns_; ++j) mu_[j] = es.eigenvalues()(static_cast<Eigen::Index>(j));
    }

    line_.resize(m_);
    spec_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * modes_));
    {
      std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
      forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(m_), line_.data(), spec_, FFTW_ESTIMATE);
      backward_ = fftw_plan_dft_c2r_1d(static_cast<int>(m_), spec_, line_.data(), FFTW_ESTIMATE);
    }
    coef_.assign(nr_ * modes_ * ns_, std::complex<double>{});
    diag_.resize(nr_);
    cw_.resize(nr_);
  }

  StiffnessSolver(const StiffnessSolver&) = delete;
  StiffnessSolver& operator=(const StiffnessSolver&) = delete;

  ~StiffnessSolver() {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_free(spec_);
  }

  double sigma() const { return sigma_; }

  /// x = K^{-1} b (b in dual form, i.e. already multiplied by node weights).
  void solve(std::span<const double> b, std::span<double> x) {
    const auto& g = *grid_;
    // s-transform folded into the FFT pass: y_t = sum_j phi_jt b_j
    std::vector<double> bt(ns_);
    for (std::size_t i = 0; i < nr_; ++i)
      for (std::size_t t = 0; t < ns_; ++t) {
        for (std::size_t k = 0; k < m_; ++k) {
          double acc = 0.0;
          const std::size_t base = g.index(i, k, 0);
          for (std::size_t j = 0; j < ns_; ++j)
            acc += phi_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t)) * b[base + j];
          line_[k] = acc;
        }
        fftw_execute(forward_);
        for (std::size_t q = 0; q < modes_; ++q)
          coef_[(t * modes_ + q) * nr_ + i] = {spec_[q][0], spec_[q][1]};
      }

    // tridiagonal radial solve per (s mode, angular mode)
    for (std::size_t t = 0; t < ns_; ++t)
      for (std::size_t q = 0; q < modes_; ++q) {
        std::complex<double>* y = &coef_[(t * modes_ + q) * nr_];
        for (std::size_t i = 0; i < nr_; ++i)
          diag_[i] = cr_[i] + (i > 0 ? cr_[i - 1] : 0.0) + ca_[i] * lam_[q] + wr_[i] * (sigma_ + mu_[t]);
        // Thomas with off-diagonals -cr_[i]
        cw_[0] = nr_ > 1 ? -cr_[0] / diag_[0] : 0.0;
        y[0] /= diag_[0];
        for (std::size_t i = 1; i < nr_; ++i) {
          const double den = diag_[i] + cr_[i - 1] * cw_[i - 1];
          cw_[i] = i + 1 < nr_ ? -cr_[i] / den : 0.0;
          y[i] = (y[i] + cr_[i - 1] * y[i - 1]) / den;
        }
        for (std::size_t i = nr_ - 1; i-- > 0;) y[i] -= cw_[i] * y[i + 1];
      }

    // inverse transforms
    const double scale = 1.0 / static_cast<double>(m_);
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t i = 0; i < nr_; ++i)
      for (std::size_t t = 0; t < ns_; ++t) {
        for (std::size_t q = 0; q < modes_; ++q) {
          const auto c = coef_[(t * modes_ + q) * nr_ + i];
          spec_[q][0] = c.real();
          spec_[q][1] = c.imag();
        }
        fftw_execute(backward_);
        for (std::size_t k = 0; k < m_; ++k) {
          const std::size_t base = g.index(i, k, 0);
          const double v = line_[k] * scale;
          for (std::size_t j = 0; j < ns_; ++j)
            x[base + j] += phi_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t)) * v;
        }
      }
  }

  /// y = K x, for checks.
  void apply(std::span<const double> x, std::span<double> y) const {
    const auto& g = *grid_;
    std::fill(y.begin(), y.end(), 0.0);
    add_neg_laplacian(x, g, y);
    const auto w = g.weights();
    for (std::size_t a = 0; a < x.size(); ++a) y[a] = w[a] * (y[a] + sigma_ * x[a]);
  }

private:
  GridPtr grid_;
  double sigma_;
  std::size_t nr_ = 0, m_ = 0, ns_ = 0, modes_ = 0;
  std::vector<double> wr_, cr_, ca_, lam_, mu_;
  Eigen::MatrixXd phi_;
  std::vector<double> line_;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_{}, backward_{};
  std::vector<std::complex<double>> coef_;
  std::vector<double> diag_, cw_;
};

} // namespace pinwheel
