#pragma once
// Pinwheel group action: Z_{ell n} rotations of the distinguished plane,
// realised on a uniform angular grid as exact index shifts.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "pinwheel/config.hpp"

namespace pinwheel {

/// Angular index shift that realises the rotation by 2*pi*j/(ell*n) on a
/// grid holding one period 2*pi/n with m nodes.
inline std::size_t component_shift(long j, std::size_t m, int ell) {
  if (ell < 1) throw ConfigError("ell must be positive");
  if (m == 0 || m % static_cast<std::size_t>(ell) != 0)
    throw ConfigError("angular node count " + std::to_string(m) +
                      " is not divisible by ell = " + std::to_string(ell));
  const long step = static_cast<long>(m) / ell;
  const long mm = static_cast<long>(m);
  long s = (j * step) % mm;
  if (s < 0) s += mm;
  return static_cast<std::size_t>(s);
}

struct PlanePoint {
  double x = 0.0;
  double y = 0.0;
  double angle = 0.0; ///< in [0, 2*pi)
};

/// The ell*n pinwheel points R e^{2 pi i (i + ell j)/(ell n)}, grouped by
/// component: result[i] holds the n points of component i+1.
inline std::vector<std::vector<PlanePoint>> orbit_points(double radius, int ell, int n) {
  if (!(radius > 0.0)) throw ConfigError("orbit radius must be positive");
  if (ell < 1 || n < 1) throw ConfigError("ell and n must be positive");
  std::vector<std::vector<PlanePoint>> out(static_cast<std::size_t>(ell));
  const double unit = 2.0 * std::numbers::pi / (ell * n);
  for (int i = 0; i < ell; ++i) {
    for (int j = 0; j < n; ++j) {
      const double a = unit * (i + ell * j);
      out[static_cast<std::size_t>(i)].push_back({radius * std::cos(a), radius * std::sin(a), a});
    }
  }
  return out;
}

/// Smallest distance between two distinct orbit points of radius R.
inline double orbit_min_chord(double radius, int ell, int n) {
  return radius * 2.0 * std::sin(std::numbers::pi / (ell * n));
}

} // namespace pinwheel
