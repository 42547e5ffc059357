#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pinwheel/equivariance.hpp"
#include "pinwheel/grid.hpp"
#include "pinwheel/symmetry.hpp"

using namespace pinwheel;

TEST(ComponentShift, Examples) {
  EXPECT_EQ(component_shift(1, 12, 2), 6u);
  EXPECT_EQ(component_shift(0, 12, 2), 0u);
  EXPECT_EQ(component_shift(3, 12, 4), 9u);
}

TEST(ComponentShift, RejectsIndivisibleNodeCount) {
  EXPECT_THROW(component_shift(1, 13, 2), ConfigError);
}

TEST(ComponentShift, GroupHomomorphism) {
  for (int ell : {2, 3, 4, 6})
    for (std::size_t m : {12u, 24u, 36u}) {
      if (m % ell) continue;
      for (int j = 0; j < ell; ++j)
        for (int k = 0; k < ell; ++k)
          EXPECT_EQ((component_shift(j, m, ell) + component_shift(k, m, ell)) % m,
                    component_shift((j + k) % ell, m, ell));
      EXPECT_EQ(component_shift(ell, m, ell), 0u);
    }
}

TEST(OrbitPoints, AnglesPerComponent) {
  auto pts = orbit_points(1.0, 2, 2);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_NEAR(pts[0][0].angle, 0.0, 1e-15);
  EXPECT_NEAR(pts[0][1].angle, std::numbers::pi, 1e-15);
  EXPECT_NEAR(pts[1][0].angle, std::numbers::pi / 2, 1e-15);
  EXPECT_NEAR(pts[1][1].angle, 3 * std::numbers::pi / 2, 1e-15);

  auto one = orbit_points(1.0, 2, 1);
  EXPECT_NEAR(one[0][0].angle, 0.0, 1e-15);
  EXPECT_NEAR(one[1][0].angle, std::numbers::pi, 1e-15);
}

TEST(OrbitPoints, MinimalChordMatchesBruteForce) {
  for (auto [ell, n] : {std::pair{2, 2}, {2, 1}, {3, 2}, {4, 3}}) {
    const double radius = 1.7;
    auto pts = orbit_points(radius, ell, n);
    std::vector<PlanePoint> all;
    for (auto& c : pts) all.insert(all.end(), c.begin(), c.end());
    double best = INFINITY;
    for (std::size_t a = 0; a < all.size(); ++a)
      for (std::size_t b = a + 1; b < all.size(); ++b)
        best = std::min(best, std::hypot(all[a].x - all[b].x, all[a].y - all[b].y));
    EXPECT_NEAR(best, orbit_min_chord(radius, ell, n), 1e-12);
  }
  EXPECT_NEAR(orbit_min_chord(1.0, 2, 2), std::sqrt(2.0), 1e-12);
}

TEST(OrbitPoints, RotationPermutesComponents) {
  const int ell = 3, n = 2;
  auto pts = orbit_points(1.0, ell, n);
  const double rot = 2 * std::numbers::pi / (ell * n);
  for (int i = 0; i < ell; ++i)
    for (const auto& p : pts[i]) {
      const double x = std::cos(rot) * p.x - std::sin(rot) * p.y;
      const double y = std::sin(rot) * p.x + std::cos(rot) * p.y;
      const auto& next = pts[(i + 1) % ell];
      double best = INFINITY;
      for (const auto& q : next) best = std::min(best, std::hypot(x - q.x, y - q.y));
      EXPECT_LT(best, 1e-12);
    }
}

namespace {

ComponentField random_field(GridPtr g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  ComponentField f(g);
  for (double& v : f.values) v = d(rng);
  return f;
}

} // namespace

TEST(Equivariance, GeneratedTupleIsExact) {
  PinwheelConfig cfg{3, 2, 2, 2.0, -1.0};
  auto g = build_grid(16, 12, 5.0, cfg);
  auto fields = expand_components(random_field(g, 3));
  EXPECT_EQ(check_equivariance(fields), 0.0);
}

TEST(Equivariance, SingleNodePerturbation) {
  PinwheelConfig cfg{2, 1, 2, 2.0, -1.0};
  auto g = build_grid(16, 12, 5.0, cfg);
  auto fields = expand_components(random_field(g, 4));
  fields[1](3, 5) += 1e-3;
  EXPECT_NEAR(check_equivariance(fields), 1e-3, 1e-15);
}

TEST(Equivariance, IndependentFieldsDeviate) {
  PinwheelConfig cfg{2, 1, 2, 2.0, -1.0};
  auto g = build_grid(16, 12, 5.0, cfg);
  std::vector<ComponentField> fields{random_field(g, 5), random_field(g, 6)};
  EXPECT_GT(check_equivariance(fields), 0.0);
}

TEST(Equivariance, MismatchedGridsThrow) {
  PinwheelConfig cfg{2, 1, 2, 2.0, -1.0};
  std::vector<ComponentField> fields{random_field(build_grid(16, 12, 5.0, cfg), 1),
                                     random_field(build_grid(16, 12, 6.0, cfg), 2)};
  EXPECT_THROW(check_equivariance(fields), GridMismatch);
}
