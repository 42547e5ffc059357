#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pinwheel {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid problem instance, grid, potential or run configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Two fields that must share a grid do not.
class GridMismatch : public Error {
public:
  using Error::Error;
};

/// The Nehari scale is undefined: the quartic-side denominator is not positive.
class NonpositiveDenominator : public Error {
public:
  explicit NonpositiveDenominator(double denom)
      : Error("Nehari denominator is not positive: " + std::to_string(denom)),
        denominator(denom) {}
  double denominator;
};

/// An iterative solve ran out of budget or stalled.
class ConvergenceError : public Error {
public:
  using Error::Error;
};

/// Test-function bumps overlap or leave the grid.
class OverlapError : public Error {
public:
  using Error::Error;
};

/// Problem instance: ell components, Z_n invariance, ambient dimension,
/// exponent p and coupling beta.
///
/// ell == 1 denotes the scalar equation (no coupling) and is only produced
/// through scalar(); validate() rejects it for the system.
struct PinwheelConfig {
  int ell = 2;
  int n = 1;
  int dim = 2;
  double p = 2.0;
  double beta = -1.0;

  static PinwheelConfig scalar(int n, int dim, double p) {
    return PinwheelConfig{1, n, dim, p, 0.0};
  }

  bool is_scalar() const { return ell == 1; }

  /// Upper end of the subcritical range (infinity for dim <= 2).
  static double critical_exponent(int dim) {
    return dim <= 2 ? INFINITY : static_cast<double>(dim) / (dim - 2);
  }

  /// Checks the pieces shared by the scalar and the coupled problem.
  void validate_common() const {
    if (n < 1) throw ConfigError("n must be >= 1");
    if (dim != 1 && dim != 2 && dim < 4)
      throw ConfigError("dim must be 1, 2 or >= 4 (got " + std::to_string(dim) + ")");
    if (!(p > 1.0)) throw ConfigError("p must exceed 1");
    if (!(p < critical_exponent(dim)))
      throw ConfigError("p is not subcritical for dim " + std::to_string(dim));
  }

  void validate() const {
    validate_common();
    if (ell < 2) throw ConfigError("ell must be >= 2");
    if (dim == 1) throw ConfigError("the pinwheel system needs dim 2 or >= 4");
    if (!(beta < 0.0)) throw ConfigError("beta must be negative");
  }

  /// Minimal chord between adjacent pinwheel points on the unit circle.
  double pinwheel_chord() const {
    return 2.0 * std::sin(std::numbers::pi / (ell * n));
  }
};

/// Area of the unit sphere S^{d-1} in R^d (2 for d = 1).
inline double sphere_area(int d) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

} // namespace pinwheel
