#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "vfp/functionals.hpp"

using namespace vfp;

namespace {

PhaseDensity standard_gaussian(std::size_t n = 256) {
  return PhaseDensity::from_function(symmetric_grid(6, n, 6, n), [](double x, double v) {
    return std::exp(-0.5 * (x * x + v * v));
  });
}

ModelSpec model(PotentialSpec v, InteractionSpec w = InteractionSpec::none(), double alpha = 1.0) {
  return ModelSpec{std::move(v), std::move(w), alpha, 0.0};
}

}  // namespace

TEST(Potential, GradientMatchesFiniteDifference) {
  const std::vector<PotentialSpec> specs{PotentialSpec::harmonic(2.0),
                                         PotentialSpec::double_well(0.25, 1.0),
                                         PotentialSpec::polynomial({0.1, -0.3, 0.5, 0.0, 0.02})};
  const double eps = 1e-5;
  for (const auto& p : specs)
    for (double x = -3.0; x <= 3.0; x += 0.37) {
      EXPECT_NEAR(p.gradient(x), (p.value(x + eps) - p.value(x - eps)) / (2 * eps), 1e-6);
      EXPECT_NEAR(p.hessian(x), (p.gradient(x + eps) - p.gradient(x - eps)) / (2 * eps), 1e-6);
    }
}

TEST(Potential, LipschitzConstants) {
  EXPECT_DOUBLE_EQ(PotentialSpec::harmonic(1.5).lipschitz_on(-6, 6), 1.5);
  // V'' = 3 a x^2 - b, largest at the domain edge: 3 * 0.25 * 36 - 1.
  EXPECT_NEAR(PotentialSpec::double_well(0.25, 1.0).lipschitz_on(-6, 6), 26.0, 1e-12);
  // V'' = 1 + 0.24 x^2 on [-6, 6].
  EXPECT_NEAR(PotentialSpec::polynomial({0, 0, 0.5, 0, 0.02}).lipschitz_on(-6, 6), 9.64, 1e-9);
}

TEST(Interaction, IsEvenAndHarmonicGradient) {
  const auto w = InteractionSpec::even_polynomial({0.0, 0.3, 0.01});
  for (double x = -4; x <= 4; x += 0.5) EXPECT_NEAR(w.value(x) - w.value(-x), 0.0, 1e-12);
  const auto h = InteractionSpec::harmonic(0.5);
  EXPECT_DOUBLE_EQ(h.gradient(2.0), 1.0);
  EXPECT_DOUBLE_EQ(h.lipschitz_on(-6, 6), 0.5);
}

TEST(ModelSpec, RejectsNonpositiveFriction) {
  EXPECT_THROW(make_model(PotentialSpec::harmonic(1), InteractionSpec::none(), -1.0, Grid1D(-1, 1, 8)),
               Error);
  EXPECT_THROW(make_model(PotentialSpec::harmonic(1), InteractionSpec::none(), 0.0, Grid1D(-1, 1, 8)),
               Error);
  const auto m = make_model(PotentialSpec::harmonic(1), InteractionSpec::none(), 1.0, Grid1D(-1, 1, 8));
  EXPECT_DOUBLE_EQ(m.lipschitz_M, 1.0);
}

TEST(ConvolvedForce, NoneIsZero) {
  for (double f : convolved_force(standard_gaussian(32), InteractionSpec::none())) EXPECT_EQ(f, 0.0);
}

TEST(ConvolvedForce, TwoParticleHandSum) {
  const ParticleCloud c({{0, 0}, {2, 0}}, {0.5, 0.5});
  const auto f = convolved_force(c, InteractionSpec::harmonic(1.0));
  EXPECT_DOUBLE_EQ(f[0], -1.0);
  EXPECT_DOUBLE_EQ(f[1], 1.0);
}

TEST(ConvolvedForce, VanishesAtCenterOfSymmetricDensity) {
  const PhaseGrid g{Grid1D(-2.5, 3.5, 31), Grid1D(-1, 1, 4)};  // x-centers symmetric about 0.5
  const auto mu = PhaseDensity::from_function(g, [](double x, double) {
    return std::exp(-(x - 0.5) * (x - 0.5)) + 0.3 * std::exp(-4 * (x - 0.5) * (x - 0.5));
  });
  const auto f = convolved_force(mu, InteractionSpec::even_polynomial({0.0, 0.5, 0.05}));
  EXPECT_NEAR(f[15], 0.0, 1e-12);
}

TEST(Energies, StandardGaussianHarmonic) {
  const auto e = energies(standard_gaussian(), model(PotentialSpec::harmonic(1.0)));
  EXPECT_NEAR(e.potential_part, 1.0, 1e-3);
  EXPECT_DOUBLE_EQ(e.interaction_part, 0.0);
  EXPECT_NEAR(*e.internal_part, -std::log(2 * std::numbers::pi * std::numbers::e), 1e-3);
  EXPECT_NEAR(*e.hamiltonian, 1.0 - std::log(2 * std::numbers::pi * std::numbers::e), 1e-3);
  EXPECT_NEAR(e.lin_v, 0.0, 1e-12);
  EXPECT_NEAR(e.lin_x, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(*e.hamiltonian, e.potential_part + e.interaction_part + *e.internal_part);
}

TEST(Energies, SingleParticle) {
  const auto e = energies(ParticleCloud({{1, 2}}, {1.0}), model(PotentialSpec::harmonic(1.0)));
  EXPECT_DOUBLE_EQ(e.lin_x, 2.0);
  EXPECT_DOUBLE_EQ(e.lin_v, 2.0);
  EXPECT_FALSE(e.internal_part.has_value());
  EXPECT_FALSE(e.hamiltonian.has_value());
}

TEST(Energies, UniformUnitSquare) {
  const auto mu = PhaseDensity::from_function(PhaseGrid{Grid1D(0, 1, 200), Grid1D(0, 1, 200)},
                                              [](double, double) { return 1.0; });
  const auto e = energies(mu, model(PotentialSpec::zero()));
  EXPECT_NEAR(*e.internal_part, 0.0, 1e-12);
  EXPECT_NEAR(e.potential_part, 1.0 / 6.0, 1e-5);
  EXPECT_NEAR(e.lin_x, 0.25, 1e-12);
}

TEST(Energies, InteractionPairSum) {
  // Particle and grid evaluations of the interaction energy agree for a
  // two-point x-marginal.
  const PhaseGrid g{Grid1D(-0.5, 3.5, 4), Grid1D(-1, 1, 4)};
  std::vector<double> rho(16, 0.0);
  rho[g.index(0, 1)] = 1.0;
  rho[g.index(2, 2)] = 1.0;
  const auto mu = PhaseDensity::normalized(g, rho);
  const auto spec = model(PotentialSpec::zero(), InteractionSpec::harmonic(1.0));
  const ParticleCloud c({{0, -0.25}, {2, 0.25}}, {0.5, 0.5});
  // 1/2 * sum_ij W(x_i - x_j) w_i w_j = 1/2 * 2 * (1/4) * 2 = 0.5
  EXPECT_NEAR(energies(mu, spec).interaction_part, 0.5, 1e-14);
  EXPECT_NEAR(energies(c, spec).interaction_part, 0.5, 1e-14);
}

TEST(VSlope, GibbsState) {
  const auto mu = standard_gaussian();
  const auto s = v_slope(mu, model(PotentialSpec::harmonic(1.0)));
  EXPECT_NEAR(s.slope_H, 0.0, 1e-3);
  // The friction and entropy terms cancel, leaving ||grad V|| = ||x|| = 1.
  EXPECT_NEAR(s.slope_LvaH, 1.0, 1e-3);
}

TEST(VSlope, ConstantInVWindow) {
  const auto mu = PhaseDensity::from_function(PhaseGrid{Grid1D(-1, 1, 16), Grid1D(-1, 1, 64)},
                                              [](double, double) { return 1.0; });
  const auto s = v_slope(mu, model(PotentialSpec::zero()));
  const double iv = std::sqrt(second_moments(mu).m2_v);
  EXPECT_GE(s.slope_H, iv - 1e-12);
}

TEST(XSlopes, HarmonicGaussian) {
  const auto xs = x_slopes(standard_gaussian(), model(PotentialSpec::harmonic(2.0)));
  EXPECT_NEAR(xs.potential, 2.0, 2e-3);
  EXPECT_DOUBLE_EQ(xs.interaction, 0.0);
  EXPECT_DOUBLE_EQ(xs.total, xs.potential);
}

TEST(PoissonBracket, FreeStreaming) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 1);
  std::vector<PhasePoint> pts(16);
  for (auto& p : pts) p = {n(rng), n(rng)};
  EXPECT_LE(poisson_bracket_residual(ParticleCloud::uniform(pts), model(PotentialSpec::zero()), 1e-4),
            1e-8);
}

TEST(PoissonBracket, SingleParticleAtRest) {
  const ParticleCloud c({{1, 0}}, {1.0});
  const auto spec = model(PotentialSpec::harmonic(1.0));
  const auto e = energies(c, spec);
  EXPECT_DOUBLE_EQ(e.lin_v, 0.0);
  EXPECT_DOUBLE_EQ(e.lin_x, 0.0);
  EXPECT_LE(poisson_bracket_residual(c, spec, 1e-3), 1e-9);
}

TEST(PoissonBracket, SecondOrderInStep) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  std::vector<PhasePoint> pts(16);
  for (auto& p : pts) p = {n(rng), n(rng)};
  const auto c = ParticleCloud::uniform(pts);
  const auto spec = model(PotentialSpec::double_well(0.25, 1.0), InteractionSpec::harmonic(1.0));
  const double r1 = poisson_bracket_residual(c, spec, 0.02);
  const double r2 = poisson_bracket_residual(c, spec, 0.01);
  EXPECT_NEAR(r1 / r2, 4.0, 0.2);
}
