#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "pinwheel/equivariance.hpp"
#include "pinwheel/scalar.hpp"
#include "pinwheel/solver.hpp"

using namespace pinwheel;

namespace {

const RadialPotential kPot = RadialPotential::default_for(2, 1);

double c_inf() {
  static const double c = ground_state_radial(2, 1.0, 2.0).energy;
  return c;
}

// Converged chain on the default-sized grid, shared by several tests.
struct Chain {
  PinwheelConfig cfg{2, 1, 2, 2.0, -1.0};
  GridPtr grid = build_grid(128, 64, 14.0, cfg);
  ComponentField init = default_initial_guess(cfg, grid, kPot, 2.0);
  std::vector<SolveReport> reports;
  SolveReport cold;

  Chain() {
    SolverOptions o;
    o.c_inf = c_inf();
    reports = continuation(cfg, kPot, grid, {-1.0, -10.0, -100.0}, init, o);
    PinwheelConfig c100 = cfg;
    c100.beta = -100.0;
    cold = minimize(c100, kPot, grid, init, o);
  }
};

const Chain& chain() {
  static const Chain c;
  return c;
}

double bump(double x, double y, double cx, double cy, double rad) {
  const double q = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (rad * rad);
  return q < 1.0 ? std::exp(-1.0 / (1.0 - q)) : 0.0;
}

} // namespace

TEST(SplittingMonitor, InsideOutside) {
  PinwheelConfig cfg;
  auto g = build_grid(64, 32, 10.0, cfg);
  auto inner = ComponentField::sample(g, [](double x, double y, double) { return bump(x, y, 1.0, 0.0, 2.0); });
  auto outer = ComponentField::sample(g, [](double x, double y, double) { return bump(x, y, 7.0, 0.0, 1.5); });
  EXPECT_EQ(splitting_monitor(inner, 4.0), 0.0);
  EXPECT_EQ(splitting_monitor(outer, 4.0), 1.0);
  EXPECT_EQ(splitting_monitor(ComponentField(g), 4.0), 0.0);
  EXPECT_THROW(splitting_monitor(inner, 0.0), ConfigError);
}

TEST(RadialityScore, RadialAndOffCentre) {
  PinwheelConfig cfg;
  auto g = build_grid(64, 32, 10.0, cfg);
  ComponentField radial(g);
  for (std::size_t i = 0; i < g->nr(); ++i)
    for (std::size_t k = 0; k < g->m(); ++k) radial(i, k) = std::exp(-0.3 * g->r(i) * g->r(i));
  EXPECT_EQ(radiality_score(radial), 0.0);
  auto off = ComponentField::sample(g, [](double x, double y, double) { return bump(x, y, 3.0, 0.0, 2.0); });
  EXPECT_GT(radiality_score(off), 0.0);
  EXPECT_EQ(radiality_score(ComponentField(g)), 0.0);
}

TEST(InitialGuess, PinwheelBumps) {
  PinwheelConfig cfg{3, 2, 2, 2.0, -1.0};
  auto g = build_grid(64, 48, 10.0, cfg);
  auto u = default_initial_guess(cfg, g, kPot, 5.0);
  // the bump of component 1 sits at angle 0 of each Z_n copy
  std::size_t best = 0;
  for (std::size_t x = 0; x < u.size(); ++x)
    if (u.values[x] > u.values[best]) best = x;
  EXPECT_EQ(best % g->m(), 0u);
  EXPECT_NEAR(g->r(best / g->m()), 5.0, g->dr());
  auto a = default_initial_guess(cfg, g, kPot, 5.0, 42, 0.1);
  auto b = default_initial_guess(cfg, g, kPot, 5.0, 42, 0.1);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, u.values);
}

TEST(Minimize, RejectsInfeasibleStart) {
  PinwheelConfig cfg{2, 1, 2, 2.0, -1.0};
  auto g = build_grid(32, 16, 10.0, cfg);
  auto radial = ComponentField::sample(g, [](double x, double y, double) { return std::exp(-(x * x + y * y)); });
  EXPECT_THROW(minimize(cfg, kPot, g, radial), NonpositiveDenominator);
  auto other = build_grid(32, 16, 11.0, cfg);
  EXPECT_THROW(minimize(cfg, kPot, other, radial), GridMismatch);
}

TEST(Minimize, StructuralInvariantsAtEveryIterate) {
  for (auto metric : {DescentMetric::L2, DescentMetric::Diagonal, DescentMetric::Sobolev, DescentMetric::Krylov, DescentMetric::Auto}) {
    PinwheelConfig cfg{3, 1, 2, 2.0, -5.0};
    auto g = build_grid(48, 24, 10.0, cfg);
    const EnergyModel model(cfg, g, kPot);
    SolverOptions o;
    o.metric = metric;
    o.max_iter = 300;
    double prev = INFINITY;
    std::size_t seen = 0;
    o.observer = [&](const IterateInfo& info) {
      ++seen;
      const auto& u = *info.field;
      EXPECT_LE(info.energy, prev + 1e-12 * std::abs(prev));
      prev = info.energy;
      const auto t = model.terms(u.values);
      EXPECT_LT(model.residual(t), 1e-10 * t.quad);
      for (double x : u.values) ASSERT_GE(x, 0.0);
      EXPECT_EQ(check_equivariance(expand_components(u)), 0.0);
    };
    auto rep = minimize(cfg, kPot, g, default_initial_guess(cfg, g, kPot, 3.0), o);
    EXPECT_EQ(seen, rep.energy_trace.size());
    for (std::size_t i = 1; i < rep.energy_trace.size(); ++i)
      EXPECT_LE(rep.energy_trace[i], rep.energy_trace[i - 1] * (1.0 + 1e-12));
  }
}

TEST(Minimize, ClampControlsSign) {
  PinwheelConfig cfg{2, 1, 2, 2.0, -1.0};
  auto g = build_grid(32, 16, 10.0, cfg);
  auto init = default_initial_guess(cfg, g, kPot, 3.0);
  init(0, 0) = -0.5;
  SolverOptions o;
  o.max_iter = 0;
  auto clamped = minimize(cfg, kPot, g, init, o);
  EXPECT_EQ(clamped.field(0, 0), 0.0);
  o.clamp = false;
  auto free = minimize(cfg, kPot, g, init, o);
  EXPECT_LT(free.field(0, 0), 0.0);
  o.max_iter = 5;
  free = minimize(cfg, kPot, g, init, o);
  EXPECT_LT(*std::min_element(free.field.values.begin(), free.field.values.end()), 0.0);
}

TEST(Minimize, Deterministic) {
  PinwheelConfig cfg{2, 1, 2, 2.0, -3.0};
  auto g = build_grid(48, 32, 10.0, cfg);
  SolverOptions o;
  o.max_iter = 400;
  auto a = minimize(cfg, kPot, g, default_initial_guess(cfg, g, kPot, 3.0, 7, 0.05), o);
  auto b = minimize(cfg, kPot, g, default_initial_guess(cfg, g, kPot, 3.0, 7, 0.05), o);
  EXPECT_EQ(a.energy_trace, b.energy_trace);
  EXPECT_EQ(a.field.values, b.field.values);
}

TEST(Minimize, BudgetExhaustion) {
  PinwheelConfig cfg;
  auto g = build_grid(32, 16, 10.0, cfg);
  SolverOptions o;
  o.max_iter = 1;
  auto rep = minimize(cfg, kPot, g, default_initial_guess(cfg, g, kPot, 3.0), o);
  EXPECT_FALSE(rep.converged);
  EXPECT_EQ(rep.status.rfind("budget_exhausted", 0), 0u);
  EXPECT_EQ(rep.energy_trace.size(), 2u);
}

TEST(Minimize, DescendsFromTestTuple) {
  PinwheelConfig cfg;
  auto g = build_grid(128, 128, 18.0, cfg);
  const auto omega = ground_state_radial(2, 1.0, 2.0);
  const auto tt = build_test_tuple(10.0, cfg, omega, kPot, g);
  SolverOptions o;
  o.max_iter = 3000;
  auto rep = minimize(cfg, kPot, g, tt.field, o);
  EXPECT_LE(rep.energy, rep.energy_trace.front());
  EXPECT_LE(rep.energy, tt.energy);
}

TEST(Minimize, BelowThresholdOnDefaultInstance) {
  const auto& r = chain().reports.front();
  EXPECT_TRUE(r.converged) << r.status;
  EXPECT_TRUE(r.below_threshold);
  EXPECT_GT(r.margin, 0.0);
  EXPECT_NEAR(r.margin, 2.0 * c_inf() - r.energy, 1e-12);
  EXPECT_LT(r.component_energy, c_inf());
  EXPECT_LT(r.boundary_fraction, 1e-3);
  EXPECT_GT(r.radiality, 0.0);
}

TEST(Minimize, ScalarInstanceMatchesGn) {
  auto cfg = PinwheelConfig::scalar(1, 2, 2.0);
  auto g = build_grid(96, 32, 12.0, cfg);
  auto gn = ground_state_Gn(kPot, 1, 2.0, g, {}, {0.0});
  cfg.beta = -7.0; // no coupling terms for ell = 1
  auto rep = minimize(cfg, kPot, g, default_initial_guess(cfg, g, kPot, 0.0));
  EXPECT_NEAR(rep.energy, gn.energy, 1e-4 * gn.energy);
}

TEST(Continuation, WarmStartBeatsColdStart) {
  const auto& c = chain();
  ASSERT_EQ(c.reports.size(), 3u);
  for (const auto& r : c.reports) EXPECT_TRUE(r.converged) << r.status;
  EXPECT_LT(c.reports.back().iterations, c.cold.iterations);
}

TEST(Continuation, BelowWeakPartitionEstimate) {
  const auto& c = chain();
  // disjointly supported tuples lie on the Nehari set for every beta, so
  // their projected energies bound the beta-minima from above
  const EnergyModel model(c.cfg, c.grid, kPot);
  const auto omega = ground_state_radial(2, 1.0, 2.0);
  double estimate = INFINITY;
  for (double radius : {6.0, 7.0, 8.0}) {
    const auto tt = build_test_tuple(radius, c.cfg, omega, kPot, c.grid);
    estimate = std::min(estimate, model.projected_energy(model.terms(tt.field.values)));
  }
  const auto seg = segregate(c.reports.back().field, c.cfg.ell);
  EXPECT_EQ(overlap(seg, c.cfg).overlap[0][1], 0.0);
  estimate = std::min(estimate, model.projected_energy(model.terms(seg.values)));
  for (const auto& r : c.reports) EXPECT_LE(r.energy, estimate + 1e-8);
}

TEST(Continuation, OverlapShrinks) {
  const auto& c = chain();
  double prev = INFINITY;
  for (const auto& r : c.reports) {
    const double o = overlap(r.field, r.config).overlap[0][1];
    EXPECT_LT(o, prev);
    prev = o;
  }
}

TEST(Continuation, ScheduleValidation) {
  PinwheelConfig cfg;
  auto g = build_grid(32, 16, 10.0, cfg);
  auto init = default_initial_guess(cfg, g, kPot, 3.0);
  EXPECT_THROW(continuation(cfg, kPot, g, {}, init), ConfigError);
  EXPECT_THROW(continuation(cfg, kPot, g, {-1.0, -10.0, -5.0}, init), ConfigError);
  EXPECT_THROW(continuation(cfg, kPot, g, {-1.0, -1.0}, init), ConfigError);
  EXPECT_THROW(continuation(cfg, kPot, g, {-1.0, 0.5}, init), ConfigError);
  try {
    continuation(cfg, kPot, g, {-2.0, -3.0}, ComponentField(g));
    FAIL() << "zero start accepted";
  } catch (const ContinuationError& e) {
    EXPECT_EQ(e.beta, -2.0);
  }
}

TEST(Segregate, DisjointCopies) {
  for (int ell : {2, 3, 4}) {
    PinwheelConfig cfg{ell, 1, 2, 2.0, -1.0};
    auto g = build_grid(32, 12 * static_cast<std::size_t>(ell), 10.0, cfg);
    auto u = default_initial_guess(cfg, g, kPot, 1.0);
    auto s = segregate(u, ell);
    const auto o = overlap(s, cfg);
    for (const auto& row : o.overlap)
      for (double x : row) EXPECT_EQ(x, 0.0);
    EXPECT_GT(*std::max_element(s.values.begin(), s.values.end()), 0.0);
  }
}
