#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "vfp/chang_cooper.hpp"
#include "vfp/fiber_jko.hpp"
#include "vfp/monotone_cdf.hpp"
#include "vfp/tridiagonal.hpp"

using namespace vfp;

namespace {

Marginal1D gaussian_fiber(const Grid1D& g, double mean, double var) {
  std::vector<double> m(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double v = g.center(k) - mean;
    m[k] = std::exp(-v * v / (2 * var));
  }
  return Marginal1D::from_masses(g, m);
}

// For Gaussian input of variance s0 and a harmonic fiber potential the
// minimizer is Gaussian. Its optimal map back to the input is linear,
// T(v) = (1 + a h - a h / s) v, and pushing N(0, s) through T must give
// N(0, s0). Solve (1 + a h - a h / s)^2 s = s0 for s by bisection.
double gaussian_step_variance(double s0, double alpha, double h) {
  auto f = [&](double s) {
    const double c = 1 + alpha * h - alpha * h / s;
    return c * c * s - s0;
  };
  double lo = alpha * h / (1 + alpha * h) + 1e-12, hi = 10 * s0 + 10;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(Tridiagonal, MatchesDenseSolve) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  const std::size_t n = 9;
  std::vector<double> lo(n), di(n), up(n), x(n), b(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    lo[k] = k ? u(rng) : 0.0;
    up[k] = k + 1 < n ? u(rng) : 0.0;
    di[k] = 3.0 + u(rng);
    x[k] = u(rng);
  }
  for (std::size_t k = 0; k < n; ++k) {
    b[k] = di[k] * x[k];
    if (k) b[k] += lo[k] * x[k - 1];
    if (k + 1 < n) b[k] += up[k] * x[k + 1];
  }
  solve_tridiagonal(lo, di, up, b);
  for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(b[k], x[k], 1e-14);
}

TEST(MonotoneCdf, QuantileRoundTrip) {
  const Grid1D g(-4, 4, 32);
  const auto p = gaussian_fiber(g, 0.3, 1.2).masses();
  const MonotoneCdf c(p, g.lower(), g.spacing());
  for (double v = -3.0; v <= 3.0; v += 0.41) {
    EXPECT_NEAR(c.quantile(c.cdf(v).value), v, 1e-10);
    EXPECT_NEAR(c.survival_quantile(c.survival(v).value), v, 1e-10);
    EXPECT_NEAR(c.cdf(v).value + c.survival(v).value, 1.0, 1e-14);
  }
}

TEST(ChangCooper, DiscreteGibbsIsNullVectorAndMassIsConserved) {
  const Grid1D g(-6, 6, 96);
  const double force = 0.7, alpha = 1.3;
  const ChangCooperOperator op(g, force, alpha);
  // Discrete equilibrium: consecutive ratios exp(-drift * dv / alpha) at edges.
  std::vector<double> rho(g.size(), 1.0);
  for (std::size_t k = 1; k < g.size(); ++k)
    rho[k] = rho[k - 1] * std::exp(-(force + alpha * g.edge(k)) * g.spacing() / alpha);
  const double top = *std::max_element(rho.begin(), rho.end());
  for (double& r : rho) r /= top;
  for (double r : op.apply(rho)) EXPECT_NEAR(r, 0.0, 1e-12);

  auto mass = gaussian_fiber(g, 1.0, 0.5).masses();
  double before = 0.0, after = 0.0;
  for (double m : mass) before += m;
  op.solve_shifted(0.1, mass);
  for (double m : mass) {
    after += m;
    EXPECT_GE(m, 0.0);
  }
  EXPECT_NEAR(after, before, 1e-13);
}

TEST(FiberJko, GibbsFiberIsFixed) {
  const Grid1D g(-8, 8, 128);
  const auto p = gaussian_fiber(g, 0.0, 1.0);
  const auto r = fiber_jko(p, 0.0, 1.0, 0.1);
  EXPECT_NEAR(r.output.mean(), 0.0, 1e-12);
  EXPECT_NEAR(r.output.variance(), p.variance(), 1e-4);
  EXPECT_LE(std::sqrt(r.cost_sq), 1e-3);
  EXPECT_TRUE(r.monotone);
}

TEST(FiberJko, VarianceTwoMatchesGaussianOracle) {
  const double s = gaussian_step_variance(2.0, 1.0, 0.1);
  EXPECT_NEAR(s, 1.830, 1e-3);
  for (std::size_t n : {128u, 256u}) {
    const Grid1D g(-8, 8, n);
    const auto r = fiber_jko(gaussian_fiber(g, 0.0, 2.0), 0.0, 1.0, 0.1);
    EXPECT_LE(r.el_residual, 1e-6);
    EXPECT_NEAR(r.output.variance(), s, 2e-3);
    EXPECT_NEAR(r.output.mean(), 0.0, 1e-12);
  }
}

TEST(FiberJko, TinyStepBarelyMoves) {
  const Grid1D g(-8, 8, 256);
  const auto p = gaussian_fiber(g, 0.0, 1.05);
  const auto r = fiber_jko(p, 0.0, 1.0, 1e-5);
  // The velocity field v + d/dv log p = 0.05 v / 1.05 has norm about 0.049,
  // so the fiber moves by about h times that.
  EXPECT_LE(std::sqrt(r.cost_sq), 1e-6);
  EXPECT_LE(r.el_residual, 1e-6);
}

TEST(FiberJko, ConstantForceShiftsMean) {
  const double h = 0.04, force = 3.0, alpha = 1.0;
  const double exact = -h * force / (1 + alpha * h);
  std::vector<double> errs;
  for (std::size_t n : {256u, 512u}) {
    const Grid1D g(-8, 8, n);
    const auto r = fiber_jko(gaussian_fiber(g, 0.0, 1.0), force, alpha, h);
    errs.push_back(std::abs(r.output.mean() - exact));
    EXPECT_NEAR(r.output.variance(), gaussian_fiber(g, 0.0, 1.0).variance(), 1e-5);
  }
  EXPECT_LE(errs[1], 1e-6);
  EXPECT_LE(errs[1], errs[0] / 3);
}

TEST(FiberJko, ImplicitFdAgreesToSecondOrder) {
  const Grid1D g(-8, 8, 256);
  const auto p = gaussian_fiber(g, 0.5, 2.0);
  FiberSolver fd;
  fd.kind = FiberSolver::Kind::kImplicitFD;
  std::vector<double> diffs;
  for (double h : {0.1, 0.05}) {
    const auto a = fiber_jko(p, 0.3, 1.0, h);
    const auto b = fiber_jko(p, 0.3, 1.0, h, fd);
    diffs.push_back(std::abs(a.output.variance() - b.output.variance()));
  }
  EXPECT_LE(diffs[0], 2e-2);
  EXPECT_GE(diffs[0] / diffs[1], 3.0);
}

TEST(FiberJko, EntropicSolverIsCloseToNewton) {
  const Grid1D g(-8, 8, 128);
  const auto p = gaussian_fiber(g, 0.0, 2.0);
  FiberSolver ent;
  ent.kind = FiberSolver::Kind::kEntropicProximal;
  const auto r = fiber_jko(p, 0.0, 1.0, 0.1, ent);
  EXPECT_NEAR(r.output.variance(), gaussian_step_variance(2.0, 1.0, 0.1), 1e-2);
  EXPECT_LE(r.el_residual, 1e-2);
}

TEST(FiberJko, EntropicSolverReportsDivergence) {
  const Grid1D g(-8, 8, 64);
  FiberSolver ent;
  ent.kind = FiberSolver::Kind::kEntropicProximal;
  ent.epsilon = 1e-3 * g.spacing() * g.spacing();
  ent.max_sweeps = 50;
  try {
    fiber_jko(gaussian_fiber(g, 0.0, 2.0), 0.0, 1.0, 0.1, ent);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSolverDiverged);
  }
}

TEST(EulerLagrangeCheck, RejectsWrongCandidate) {
  const Grid1D g(-8, 8, 128);
  const auto p = gaussian_fiber(g, 0.0, 2.0);
  const auto good = fiber_jko(p, 0.0, 1.0, 0.1);
  const auto bad = gaussian_fiber(g, 0.0, 1.6);
  const auto bm = bad.masses();
  const auto pm = p.masses();
  const auto c = euler_lagrange_check(g, pm, bm, 0.0, 1.0, 0.1);
  EXPECT_GE(c.residual, 1e3 * good.el_residual);
  EXPECT_GE(c.residual, 1e-3);
}

TEST(EulerLagrangeCheck, FlagsNonmonotoneMap) {
  // A bimodal output with a deep gap: the log-gradient term folds the map.
  const Grid1D g(-4, 4, 64);
  const auto p = gaussian_fiber(g, 0.0, 1.0).masses();
  std::vector<double> q(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double v = g.center(k);
    q[k] = std::exp(-8 * (v - 1.5) * (v - 1.5)) + std::exp(-8 * (v + 1.5) * (v + 1.5)) + 1e-9;
  }
  const auto c = euler_lagrange_check(g, p, q, 0.0, 1.0, 1.0);
  EXPECT_FALSE(c.monotone);
}

TEST(FiberJko, RejectsBadArguments) {
  const Grid1D g(-4, 4, 16);
  const auto p = gaussian_fiber(g, 0.0, 1.0);
  EXPECT_THROW(fiber_jko(p, 0.0, 1.0, 0.0), Error);
  EXPECT_THROW(fiber_jko(p, 0.0, 0.0, 0.1), Error);
  EXPECT_THROW(fiber_jko(p, std::nan(""), 1.0, 0.1), Error);
}
