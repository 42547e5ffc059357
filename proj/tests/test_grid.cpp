#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pinwheel/grid.hpp"

using namespace pinwheel;

namespace {

const PinwheelConfig kCfg{2, 1, 2, 2.0, -1.0};

ComponentField random_field(GridPtr g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  ComponentField f(g);
  for (double& v : f.values) v = d(rng);
  return f;
}

// smooth bump supported in |x - c| < rad
double bump(double x, double y, double cx, double cy, double rad) {
  const double q = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (rad * rad);
  return q < 1.0 ? std::exp(-1.0 / (1.0 - q)) : 0.0;
}

} // namespace

TEST(BuildGrid, Construction) {
  auto g = build_grid(64, 12, 12.0, kCfg);
  EXPECT_EQ(g->size(), 64u * 12u);
  EXPECT_EQ(g->nr(), 64u);
  EXPECT_EQ(g->m(), 12u);
}

TEST(BuildGrid, Rejections) {
  EXPECT_THROW(build_grid(64, 13, 12.0, kCfg), ConfigError);
  EXPECT_THROW(build_grid(4, 12, 12.0, kCfg), ConfigError);
  EXPECT_THROW(build_grid(64, 0, 12.0, kCfg), ConfigError);
  EXPECT_THROW(build_grid(64, 12, 0.0, kCfg), ConfigError);
  EXPECT_THROW(build_grid(64, 12, 12.0, kCfg, 4), ConfigError);
  PinwheelConfig c4{2, 1, 4, 1.5, -1.0};
  EXPECT_THROW(build_grid(64, 12, 12.0, c4, 1), ConfigError);
  EXPECT_NO_THROW(build_grid(64, 12, 12.0, c4, 16));
}

TEST(BuildGrid, DiskAreaFromWeights) {
  auto g = build_grid(256, 12, 2.0, kCfg);
  ComponentField one(g);
  for (double& v : one.values) v = 1.0;
  EXPECT_NEAR(integrate(one), 4.0 * std::numbers::pi, 0.01 * 4.0 * std::numbers::pi);
}

TEST(BuildGrid, CylindricalMeasure) {
  // dim 4: |x|^2 < R^2 is approximated by the product region; unit field gives
  // pi R^2 * |S^1| S^2 / 2 in the limit
  PinwheelConfig c4{2, 1, 4, 1.5, -1.0};
  auto g = build_grid(200, 4, 2.0, c4, 200, 3.0);
  ComponentField one(g);
  for (double& v : one.values) v = 1.0;
  EXPECT_NEAR(integrate(one) / g->domain_measure(), 1.0, 0.02);
}

TEST(Integrate, ZeroGaussianLinearity) {
  auto g = build_grid(8192, 2, 8.0, kCfg);
  EXPECT_EQ(integrate(ComponentField(g)), 0.0);
  auto gauss = ComponentField::sample(g, [](double x, double y, double) { return std::exp(-(x * x + y * y)); });
  EXPECT_NEAR(integrate(gauss), std::numbers::pi, 1e-6);

  auto h = build_grid(64, 12, 4.0, kCfg);
  auto f = ComponentField::sample(h, [](double x, double y, double) { return bump(x, y, 1.0, 0.5, 1.5); });
  auto f2 = f;
  for (double& v : f2.values) v *= 2.0;
  EXPECT_DOUBLE_EQ(integrate(f2), 2.0 * integrate(f));
}

TEST(Integrate, RotationInvariantExactly) {
  auto g = build_grid(32, 24, 4.0, kCfg);
  auto f = random_field(g, 7);
  const double base = integrate(f);
  for (std::size_t s = 1; s < g->m(); ++s) EXPECT_EQ(integrate(rotate_by_index(f, s)), base);
}

TEST(Laplacian, ConstantIsHarmonicInside) {
  auto g = build_grid(32, 12, 4.0, kCfg);
  ComponentField c(g);
  for (double& v : c.values) v = 3.25;
  auto lap = laplacian(c);
  for (std::size_t i = 0; i + 1 < g->nr(); ++i)
    for (std::size_t k = 0; k < g->m(); ++k) EXPECT_EQ(lap(i, k), 0.0);
}

TEST(Laplacian, GaussianSecondOrder) {
  auto err = [](std::size_t nr) {
    auto g = build_grid(nr, 12, 8.0, kCfg);
    auto f = ComponentField::sample(g, [](double x, double y, double) { return std::exp(-0.5 * (x * x + y * y)); });
    auto lap = laplacian(f);
    double e = 0.0;
    for (std::size_t i = 0; i + 1 < nr; ++i) {
      const double r = g->r(i);
      e = std::max(e, std::abs(lap(i, 0) - (r * r - 2.0) * std::exp(-0.5 * r * r)));
    }
    return e;
  };
  const double e1 = err(128), e2 = err(256);
  EXPECT_LT(e1, 1e-2);
  EXPECT_GT(e1 / e2, 3.5);
}

double harmonic_residual(std::size_t nr, std::size_t m, AngularStencil st) {
  // r^2 cos(2 theta) = x^2 - y^2
  auto g = build_grid(nr, m, 2.0, kCfg, 1, 0.0, st);
  auto f = ComponentField::sample(g, [](double x, double y, double) { return x * x - y * y; });
  auto lap = laplacian(f);
  double e = 0.0;
  for (std::size_t i = 0; i + 1 < nr; ++i)
    for (std::size_t k = 0; k < m; ++k) e = std::max(e, std::abs(lap(i, k)));
  return e;
}

TEST(Laplacian, HarmonicPolynomialConvergesCentral) {
  const double e1 = harmonic_residual(32, 32, AngularStencil::Central);
  const double e2 = harmonic_residual(64, 64, AngularStencil::Central);
  EXPECT_LT(e2, 0.1);
  EXPECT_GT(e1 / e2, 3.0);
}

TEST(Laplacian, SpectralStencilResolvesLowModesExactly) {
  EXPECT_LT(harmonic_residual(32, 32, AngularStencil::Spectral), 1e-9);
  EXPECT_LT(harmonic_residual(64, 64, AngularStencil::Spectral), 1e-9);
}

TEST(Laplacian, AngularSymbols) {
  auto c = build_grid(8, 12, 2.0, kCfg, 1, 0.0, AngularStencil::Central);
  auto s = build_grid(8, 12, 2.0, kCfg, 1, 0.0, AngularStencil::Spectral);
  for (std::size_t q = 0; q < 12; ++q) {
    const double qt = static_cast<double>(std::min(q, 12 - q));
    const double h = 2.0 * std::numbers::pi / 12.0;
    EXPECT_NEAR(s->angular_symbol(q), (qt * h) * (qt * h), 1e-12);
    EXPECT_NEAR(c->angular_symbol(q), 4.0 * std::pow(std::sin(0.5 * q * h), 2), 1e-12);
  }
}

TEST(InnerProduct, BilinearSymmetricCoercive) {
  auto g = build_grid(32, 12, 4.0, kCfg);
  auto pot = RadialPotential::exponential_well(1.0, 0.5, 0.5);
  auto u = random_field(g, 1), v = random_field(g, 2);
  EXPECT_EQ(inner_product_V(ComponentField(g), v, pot), 0.0);
  EXPECT_GT(inner_product_V(u, u, pot), 0.0);
  EXPECT_EQ(inner_product_V(u, v, pot), inner_product_V(v, u, pot));
}

TEST(InnerProduct, TwoHomogeneous) {
  auto g = build_grid(32, 12, 4.0, kCfg);
  auto pot = RadialPotential::exponential_well(1.0, 0.5, 0.5);
  auto u = random_field(g, 3);
  auto u2 = u;
  for (double& x : u2.values) x *= 2.0; // powers of two keep this exact
  EXPECT_EQ(inner_product_V(u2, u2, pot), 4.0 * inner_product_V(u, u, pot));
}

TEST(InnerProduct, IntegrationByParts) {
  for (std::size_t nr : {64u, 128u}) {
    auto g = build_grid(nr, 48, 5.0, kCfg);
    auto u = ComponentField::sample(g, [](double x, double y, double) { return bump(x, y, 1.0, 0.0, 2.5); });
    auto v = ComponentField::sample(g, [](double x, double y, double) { return bump(x, y, -0.5, 0.7, 2.0); });
    auto lap = laplacian(u);
    ComponentField prod(g);
    for (std::size_t x = 0; x < prod.size(); ++x) prod.values[x] = -lap.values[x] * v.values[x];
    const double lhs = integrate(prod);
    const double rhs = gradient_form(u.values, v.values, *g);
    EXPECT_LT(std::abs(lhs - rhs) / std::abs(rhs), 1e-2);
  }
}

TEST(Fields, ComponentIsIndexShift) {
  auto g = build_grid(16, 12, 4.0, kCfg);
  auto f = random_field(g, 9);
  auto c = component(f, 1);
  for (std::size_t i = 0; i < g->nr(); ++i)
    for (std::size_t k = 0; k < g->m(); ++k) EXPECT_EQ(c(i, k), f(i, (k + 6) % 12));
}

TEST(Fields, MismatchDetected) {
  auto a = ComponentField(build_grid(16, 12, 4.0, kCfg));
  auto b = ComponentField(build_grid(16, 12, 5.0, kCfg));
  EXPECT_THROW(require_same_grid(a, b), GridMismatch);
  EXPECT_THROW(ComponentField(a.grid, std::vector<double>(3)), GridMismatch);
}
