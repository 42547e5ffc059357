#pragma once
// Equivariance check for explicitly stored component tuples.

#include <cmath>
#include <span>

#include "pinwheel/grid.hpp"

namespace pinwheel {

/// max_{j,x} |u_{j+1}(x) - u_1(rotated x)|, the rotation applied by index shift.
inline double check_equivariance(std::span<const ComponentField> fields) {
  if (fields.empty()) return 0.0;
  const auto& u1 = fields.front();
  const auto& g = *u1.grid;
  double dev = 0.0;
  for (std::size_t j = 1; j < fields.size(); ++j) {
    require_same_grid(u1, fields[j]);
    const std::size_t shift = g.shift_of(static_cast<long>(j));
    for (std::size_t i = 0; i < g.nr(); ++i)
      for (std::size_t k = 0; k < g.m(); ++k)
        for (std::size_t s = 0; s < g.ns(); ++s) {
          const double expect = u1(i, (k + shift) % g.m(), s);
          dev = std::max(dev, std::abs(fields[j](i, k, s) - expect));
        }
  }
  return dev;
}

/// The explicit tuple (u_1, ..., u_ell) generated from u_1.
inline std::vector<ComponentField> expand_components(const ComponentField& u1) {
  std::vector<ComponentField> out;
  out.reserve(static_cast<std::size_t>(u1.grid->ell()));
  out.push_back(u1);
  for (int j = 1; j < u1.grid->ell(); ++j) out.push_back(component(u1, j));
  return out;
}

} // namespace pinwheel
