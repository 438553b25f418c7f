#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "vfp/scheme.hpp"

using namespace vfp;

namespace {

PhaseDensity gaussian(const PhaseGrid& g, double mx, double mv, double sx, double sv, double cxv = 0.0) {
  const double det = sx * sv - cxv * cxv;
  return PhaseDensity::from_function(g, [&](double x, double v) {
    const double a = x - mx, b = v - mv;
    return std::exp(-0.5 * (sv * a * a - 2 * cxv * a * b + sx * b * b) / det);
  });
}

PhaseDensity lumpy(const PhaseGrid& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::vector<double> rho(g.size());
  for (std::size_t i = 0; i < g.x.size(); ++i)
    for (std::size_t j = 0; j < g.v.size(); ++j) {
      const double x = g.x.center(i), v = g.v.center(j);
      rho[g.index(i, j)] = u(rng) * std::exp(-0.5 * (x * x + (v - 0.3 * x) * (v - 0.3 * x)));
    }
  return PhaseDensity::normalized(g, rho);
}

ModelSpec harmonic_model(const PhaseGrid& g, double lambda = 1.0, double alpha = 1.0) {
  return make_model(PotentialSpec::harmonic(lambda), InteractionSpec::none(), alpha, g.x);
}

double fiber_mean(const PhaseDensity& mu, std::size_t i) {
  const auto& g = mu.grid();
  double m = 0.0, z = 0.0;
  for (std::size_t j = 0; j < g.v.size(); ++j) {
    m += g.v.center(j) * mu.at(i, j);
    z += mu.at(i, j);
  }
  return m / z;
}

double fiber_variance(const PhaseDensity& mu, std::size_t i) {
  const auto& g = mu.grid();
  const double m = fiber_mean(mu, i);
  double s = 0.0, z = 0.0;
  for (std::size_t j = 0; j < g.v.size(); ++j) {
    const double d = g.v.center(j) - m;
    s += d * d * mu.at(i, j);
    z += mu.at(i, j);
  }
  return s / z;
}

}  // namespace

TEST(VelocityStep, PreservesXMarginal) {
  const auto g = symmetric_grid(5, 40, 8, 96);
  const auto mu = lumpy(g, 3);
  const auto spec = make_model(PotentialSpec::double_well(0.25, 1.0), InteractionSpec::harmonic(0.5),
                               1.0, g.x);
  const auto r = velocity_step(mu, spec, SchemeConfig{}, 0.05);
  const auto before = marginal(mu, Axis::kX), after = marginal(r.mu_bar, Axis::kX);
  for (std::size_t i = 0; i < g.x.size(); ++i) EXPECT_NEAR(after[i], before[i], 1e-14);
  EXPECT_LE(r.max_el_residual, 1e-5);
  EXPECT_TRUE(r.monotone);
}

TEST(VelocityStep, GibbsConditionalMeansMoveByFrozenForce) {
  // A product of the x-Gibbs factor with N(0, 1) in v: every fiber is already
  // at equilibrium for the velocity part, so only the force F = x shifts it,
  // by -h x / (1 + alpha h).
  const auto g = symmetric_grid(4, 32, 8, 512);
  const auto mu = gaussian(g, 0, 0, 1, 1);
  const double h = 0.05;
  const auto r = velocity_step(mu, harmonic_model(g), SchemeConfig{}, h);
  for (std::size_t i = 4; i < 28; i += 3) {
    const double x = g.x.center(i);
    EXPECT_NEAR(fiber_mean(r.mu_bar, i), -h * x / (1 + h), 2e-6) << "x = " << x;
    EXPECT_NEAR(r.force[i], x, 1e-14);
  }
}

TEST(VelocityStep, VarianceTwoFibersContract) {
  const auto g = symmetric_grid(3, 12, 8, 128);
  const auto mu = PhaseDensity::from_function(g, [](double x, double v) {
    return (1.0 + 0.2 * std::cos(x)) * std::exp(-v * v / 4.0);
  });
  const auto spec = make_model(PotentialSpec::zero(), InteractionSpec::none(), 1.0, g.x);
  const auto r = velocity_step(mu, spec, SchemeConfig{}, 0.1);
  for (std::size_t i = 0; i < g.x.size(); ++i) EXPECT_NEAR(fiber_variance(r.mu_bar, i), 1.830, 2e-3);
}

TEST(VelocityStep, FiberObjectiveDecreases) {
  const auto g = symmetric_grid(3, 8, 8, 128);
  const auto mu = lumpy(g, 9);
  const auto spec = harmonic_model(g, 2.0, 0.7);
  const double h = 0.1;
  const auto force = total_force(mu, spec);
  const double dv = g.v.spacing();
  auto objective = [&](std::span<const double> q, double f, double cost) {
    double s = cost / (2 * h);
    for (std::size_t j = 0; j < q.size(); ++j) {
      const double v = g.v.center(j);
      s += (f * v + 0.5 * spec.alpha * v * v) * q[j];
      if (q[j] > 0) s += spec.alpha * q[j] * std::log(q[j] / dv);
    }
    return s;
  };
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    const auto p = Marginal1D::from_masses(g.v, mu.row(i));
    const auto r = fiber_jko(p, force[i], spec.alpha, h);
    EXPECT_LT(objective(r.output.masses(), force[i], r.cost_sq),
              objective(p.masses(), force[i], 0.0));
  }
}

TEST(PositionStep, PreservesVMarginal) {
  const auto g = symmetric_grid(6, 96, 3, 24);
  const auto mu = lumpy(g, 5);
  const auto r = position_step(mu, 0.07);
  const auto before = marginal(mu, Axis::kV), after = marginal(r.mu, Axis::kV);
  for (std::size_t j = 0; j < g.v.size(); ++j) EXPECT_NEAR(after[j], before[j], 1e-12);
  EXPECT_NEAR(r.mass_renorm, 1.0 / (1.0 - r.boundary_leak), 1e-12);
}

TEST(PositionStep, ZeroVelocityRowIsUnchanged) {
  const PhaseGrid g{Grid1D(-4, 4, 32), Grid1D(-1, 1, 5)};
  const auto mu = lumpy(g, 11);
  const auto r = position_step(mu, 0.3, 1.0);
  for (std::size_t i = 0; i < g.x.size(); ++i) EXPECT_EQ(r.mu.at(i, 2), mu.at(i, 2));
}

TEST(PositionStep, IntegerShiftIsExact) {
  // dx = 0.25 and v in {-0.75, -0.25, 0.25, 0.75}: h = 1 shifts rows by -3, -1, 1, 3 cells.
  const PhaseGrid g{Grid1D(-4, 4, 32), Grid1D(-1, 1, 4)};
  std::vector<double> rho(g.size(), 0.0);
  for (std::size_t i = 10; i < 22; ++i)
    for (std::size_t j = 0; j < 4; ++j) rho[g.index(i, j)] = 1.0 + 0.1 * static_cast<double>(i + j);
  const auto mu = PhaseDensity::normalized(g, rho);
  const auto r = position_step(mu, 1.0);
  const int shifts[] = {-3, -1, 1, 3};
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t i = 10; i < 22; ++i)
      EXPECT_EQ(r.mu.at(static_cast<std::size_t>(static_cast<int>(i) + shifts[j]), j), mu.at(i, j));
  EXPECT_EQ(r.boundary_leak, 0.0);
}

TEST(PositionStep, GaussianSecondMomentAndCost) {
  const auto g = symmetric_grid(8, 256, 8, 128);
  const auto mu = gaussian(g, 0, 0, 1, 1);
  const double h = 0.1;
  const auto r = position_step(mu, h);
  // Shear: E[(x + h v)^2] = 1 + h^2.
  EXPECT_NEAR(second_moments(r.mu).m2_x, 1.01, 1e-3);
  EXPECT_NEAR(r.w2x_cost * r.w2x_cost, h * h * second_moments(mu).m2_v, 1e-15);
}

TEST(PositionStep, LeakBeyondCapThrows) {
  const auto g = symmetric_grid(1, 16, 4, 16);
  const auto mu = PhaseDensity::from_function(g, [](double, double) { return 1.0; });
  try {
    position_step(mu, 0.5, 1e-6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBoundaryLeakExceeded);
  }
}

TEST(PositionStep, RemapEntropyErrorShrinksUnderRefinement) {
  std::vector<double> errs;
  for (std::size_t n : {64u, 128u}) {
    const auto g = symmetric_grid(6, n, 6, n);
    const auto mu = gaussian(g, 0.5, 0.2, 1.0, 0.8, 0.3);
    errs.push_back(position_step(mu, 0.01).entropy_remap_error);
  }
  EXPECT_GE(errs[0] / errs[1], 1.5);
}

TEST(RunScheme, ZeroStepsGivesInitialState) {
  const auto g = symmetric_grid(4, 16, 4, 16);
  const auto mu = gaussian(g, 0, 0, 1, 1);
  SchemeConfig cfg;
  cfg.n_steps = 0;
  const auto traj = run_scheme(mu, harmonic_model(g), cfg);
  ASSERT_EQ(traj.snapshots.size(), 1u);
  EXPECT_TRUE(traj.reports.empty());
  EXPECT_EQ(traj.final_state().values()[37], mu.values()[37]);
}

TEST(RunScheme, StridedSnapshotsAndTimes) {
  const auto g = symmetric_grid(6, 48, 6, 48);
  SchemeConfig cfg;
  cfg.partition = {0.01, 0.02, 0.01, 0.03, 0.01};
  cfg.snapshot_stride = 2;
  const auto traj = run_scheme(gaussian(g, 1, 0, 0.5, 0.7), harmonic_model(g), cfg);
  ASSERT_EQ(traj.reports.size(), 5u);
  EXPECT_NEAR(traj.reports.back().t, 0.08, 1e-15);
  EXPECT_EQ(traj.snapshot_steps, (std::vector<std::size_t>{0, 2, 4, 5}));
  for (const auto& r : traj.reports) EXPECT_LE(r.el_residual, 1e-5);
}

TEST(RunScheme, RejectsBadConfig) {
  const auto g = symmetric_grid(4, 16, 4, 16);
  SchemeConfig cfg;
  cfg.partition = {0.01, -0.01};
  EXPECT_THROW(run_scheme(gaussian(g, 0, 0, 1, 1), harmonic_model(g), cfg), Error);
}

TEST(ParticleStep, SingleParticleHarmonic) {
  const ParticleCloud c({{1, 0}}, {1.0});
  const auto spec = ModelSpec{PotentialSpec::harmonic(1.0), InteractionSpec::none(), 1.0, 1.0};
  const auto n = particle_step(c, spec, 0.1);
  EXPECT_NEAR(n.points()[0].v, -0.1 / 1.1, 1e-15);
  EXPECT_NEAR(n.points()[0].x, 1.0 - 0.01 / 1.1, 1e-15);
}

TEST(ParticleStep, ZeroFrictionIsSymplecticEuler) {
  const ParticleCloud c({{1, 0}}, {1.0});
  const auto spec = ModelSpec{PotentialSpec::harmonic(1.0), InteractionSpec::none(), 0.0, 1.0};
  const auto n = particle_step(c, spec, 0.1);
  EXPECT_NEAR(n.points()[0].v, -0.1, 1e-15);
  EXPECT_NEAR(n.points()[0].x, 0.99, 1e-15);
}

TEST(ParticleStep, PureFrictionDecaysVelocity) {
  const ParticleCloud c({{0, 2}}, {1.0});
  const auto spec = ModelSpec{PotentialSpec::zero(), InteractionSpec::none(), 2.0, 0.0};
  const auto n = particle_step(c, spec, 0.5);
  EXPECT_NEAR(n.points()[0].v, 1.0, 1e-15);
  EXPECT_NEAR(n.points()[0].x, 0.5, 1e-15);
}

TEST(ParticleStep, InteractionConservesMomentumWithoutConfinement) {
  const ParticleCloud c({{0, 0.3}, {1.5, -0.1}, {-0.7, 0.4}}, {0.2, 0.5, 0.3});
  const auto spec = ModelSpec{PotentialSpec::zero(), InteractionSpec::harmonic(1.0), 0.0, 1.0};
  const auto n = particle_step(c, spec, 0.1);
  double p0 = 0, p1 = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    p0 += c.weights()[k] * c.points()[k].v;
    p1 += n.weights()[k] * n.points()[k].v;
  }
  EXPECT_NEAR(p1, p0, 1e-15);
}
