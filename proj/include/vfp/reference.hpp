#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "vfp/chang_cooper.hpp"
#include "vfp/error.hpp"
#include "vfp/functionals.hpp"
#include "vfp/parallel.hpp"
#include "vfp/phase_space.hpp"
#include "vfp/scheme.hpp"

namespace vfp {

/// Mean and covariance of a Gaussian on phase space.
struct GaussianState {
  std::array<double, 2> mean{0.0, 0.0};
  /// {{cov_xx, cov_xv}, {cov_xv, cov_vv}}
  std::array<std::array<double, 2>, 2> cov{{{1.0, 0.0}, {0.0, 1.0}}};

  void validate() const {
    require(std::abs(cov[0][1] - cov[1][0]) <= 1e-14, ErrorCode::kInvalidArgument,
            "covariance must be symmetric");
    const double det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    require(cov[0][0] > 0.0 && det > 0.0, ErrorCode::kInvalidArgument,
            "covariance must be positive definite");
  }

  static GaussianState from_moments(const PhaseMoments& m) {
    return {{m.mean_x, m.mean_v}, {{{m.cov_xx, m.cov_xv}, {m.cov_xv, m.cov_vv}}}};
  }
};

/// Mean and covariance dynamics of the linear equation with V = lambda x^2/2
/// and no interaction, integrated with classical RK4.
inline GaussianState gaussian_ou_evolve(const GaussianState& initial, double lambda, double alpha,
                                        double t, double dt_inner = 1e-4) {
  initial.validate();
  require(lambda > 0.0 && alpha > 0.0, ErrorCode::kInvalidArgument,
          "lambda and alpha must be positive");
  require(t >= 0.0 && dt_inner > 0.0, ErrorCode::kInvalidArgument, "invalid time arguments");
  using S = std::array<double, 5>;  // mx, mv, sxx, sxv, svv
  auto rhs = [&](const S& s) -> S {
    const double mx = s[0], mv = s[1], sxx = s[2], sxv = s[3], svv = s[4];
    // A = [[0, 1], [-lambda, -alpha]], Q = diag(0, 2 alpha)
    return {mv, -lambda * mx - alpha * mv, 2.0 * sxv, svv - lambda * sxx - alpha * sxv,
            -2.0 * lambda * sxv - 2.0 * alpha * svv + 2.0 * alpha};
  };
  S s{initial.mean[0], initial.mean[1], initial.cov[0][0], initial.cov[0][1], initial.cov[1][1]};
  double done = 0.0;
  while (done < t) {
    const double dt = std::min(dt_inner, t - done);
    auto axpy = [](const S& a, double c, const S& b) {
      S r;
      for (std::size_t k = 0; k < 5; ++k) r[k] = a[k] + c * b[k];
      return r;
    };
    const S k1 = rhs(s);
    const S k2 = rhs(axpy(s, 0.5 * dt, k1));
    const S k3 = rhs(axpy(s, 0.5 * dt, k2));
    const S k4 = rhs(axpy(s, dt, k3));
    for (std::size_t k = 0; k < 5; ++k) s[k] += dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    done += dt;
  }
  return {{s[0], s[1]}, {{{s[2], s[3]}, {s[3], s[4]}}}};
}

/// Gaussian sampled at cell centers and normalized on the grid.
inline PhaseDensity gaussian_density(const PhaseGrid& grid, const GaussianState& g) {
  g.validate();
  const double a = g.cov[0][0], b = g.cov[0][1], c = g.cov[1][1];
  const double det = a * c - b * b;
  return PhaseDensity::from_function(grid, [&](double x, double v) {
    const double dx = x - g.mean[0], dv = v - g.mean[1];
    return std::exp(-0.5 * (c * dx * dx - 2.0 * b * dx * dv + a * dv * dv) / det);
  });
}

/// Stationary state exp(-V(x) - v^2/2) normalized on the grid.
inline PhaseDensity gibbs_density(const PhaseGrid& grid, const ModelSpec& spec) {
  require(!spec.interaction.present(), ErrorCode::kUnsupportedInteraction,
          "the stationary formula covers models without interaction only");
  // Shift V by its minimum on the grid so the exponent cannot underflow wholesale.
  double vmin = spec.potential.value(grid.x.center(0));
  for (std::size_t i = 1; i < grid.x.size(); ++i)
    vmin = std::min(vmin, spec.potential.value(grid.x.center(i)));
  return PhaseDensity::from_function(grid, [&](double x, double v) {
    return std::exp(-(spec.potential.value(x) - vmin) - 0.5 * v * v);
  });
}

/// One Strang-split step of a finite-difference solver: half shear, TR-BDF2
/// Chang-Cooper drift-diffusion in v with the force at the half-sheared state,
/// half shear.
inline PhaseDensity fd_vfp_step(const PhaseDensity& mu, const ModelSpec& spec, double dt,
                                double cfl_max = 1.0, double leak_cap = 1e-6, int threads = 1) {
  spec.validate();
  require(dt > 0.0 && std::isfinite(dt), ErrorCode::kInvalidArgument, "dt must be positive");
  const auto& g = mu.grid();
  const double vmax = std::max(std::abs(g.v.lower()), std::abs(g.v.upper()));
  const double cfl = vmax * 0.5 * dt / g.x.spacing();
  require(cfl <= cfl_max, ErrorCode::kCflViolation,
          "advective CFL number " + std::to_string(cfl) + " exceeds " + std::to_string(cfl_max));
  auto half = position_step(mu, 0.5 * dt, leak_cap, threads).mu;

  const auto force = total_force(half, spec);
  std::vector<double> rho(half.values().begin(), half.values().end());
  const std::size_t nv = g.v.size();
  const double gamma = 2.0 - std::numbers::sqrt2;
  parallel_for(g.x.size(), threads, [&](std::size_t i) {
    std::vector<double> f(rho.begin() + static_cast<std::ptrdiff_t>(i * nv),
                          rho.begin() + static_cast<std::ptrdiff_t>((i + 1) * nv));
    double mass = 0.0;
    for (double r : f) mass += r;
    if (mass == 0.0) return;
    const ChangCooperOperator op(g.v, force[i], spec.alpha);
    // Trapezoidal stage to t + gamma dt.
    std::vector<double> stage(f);
    const auto lf = op.apply(f);
    for (std::size_t j = 0; j < nv; ++j) stage[j] += 0.5 * gamma * dt * lf[j];
    op.solve_shifted(0.5 * gamma * dt, stage);
    // BDF2 stage to t + dt.
    const double denom = gamma * (2.0 - gamma);
    std::vector<double> next(nv);
    for (std::size_t j = 0; j < nv; ++j)
      next[j] = stage[j] / denom - (1.0 - gamma) * (1.0 - gamma) / denom * f[j];
    op.solve_shifted((1.0 - gamma) / (2.0 - gamma) * dt, next);
    double after = 0.0;
    for (double& r : next) {
      r = std::max(r, 0.0);
      after += r;
    }
    for (std::size_t j = 0; j < nv; ++j) rho[i * nv + j] = next[j] * mass / after;
  });
  PhaseDensity mid(g, std::move(rho), mu.mass_tolerance());
  return position_step(mid, 0.5 * dt, leak_cap, threads).mu;
}

enum class LangevinIntegrator { kEulerMaruyama, kBaoab };

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Standard normal from a counter-based stream keyed by (seed, particle, step).
inline double counter_normal(std::uint64_t seed, std::uint64_t particle, std::uint64_t step) {
  const std::uint64_t key = splitmix64(seed ^ splitmix64(particle ^ splitmix64(step)));
  const std::uint64_t a = splitmix64(key), b = splitmix64(key + 1);
  const double u1 = (static_cast<double>(a >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Uniform on (0, 1) from the same keyed stream.
inline double counter_uniform(std::uint64_t seed, std::uint64_t particle, std::uint64_t step) {
  const std::uint64_t key = splitmix64(seed ^ splitmix64(particle ^ splitmix64(step)));
  return (static_cast<double>(splitmix64(key + 2) >> 11) + 0.5) * 0x1.0p-53;
}

// grad W * empirical measure for polynomial W, via power moments of the cloud.
class InteractionMoments {
 public:
  InteractionMoments(const InteractionSpec& w, const std::vector<PhasePoint>& pts,
                     std::span<const double> weights)
      : c_(w.coefficients()) {
    if (!w.present() || c_.size() < 2) return;
    const std::size_t deg = c_.size() - 2;  // degree of grad W
    mom_.assign(deg + 1, 0.0);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      double p = weights[k];
      for (std::size_t m = 0; m <= deg; ++m) {
        mom_[m] += p;
        p *= pts[k].x;
      }
    }
  }

  double force(double x) const {
    if (mom_.empty()) return 0.0;
    // grad W(z) = sum_k k c_k z^(k-1); expand (x - y)^(k-1) binomially.
    double total = 0.0;
    for (std::size_t k = 1; k < c_.size(); ++k) {
      if (c_[k] == 0.0) continue;
      const std::size_t n = k - 1;
      double binom = 1.0, s = 0.0;
      for (std::size_t m = 0; m <= n; ++m) {
        const double sign = (m % 2 == 0) ? 1.0 : -1.0;
        s += binom * std::pow(x, static_cast<double>(n - m)) * sign * mom_[m];
        binom = binom * static_cast<double>(n - m) / static_cast<double>(m + 1);
      }
      total += static_cast<double>(k) * c_[k] * s;
    }
    return total;
  }

 private:
  std::vector<double> c_;
  std::vector<double> mom_;
};

}  // namespace detail

/// Underdamped Langevin dynamics whose law solves the kinetic equation.
/// Deterministic for a given seed and thread count independent.
inline ParticleCloud langevin_simulate(const ParticleCloud& cloud, const ModelSpec& spec, double dt,
                                       double t, std::uint64_t seed,
                                       LangevinIntegrator integrator = LangevinIntegrator::kBaoab,
                                       int threads = 1) {
  spec.validate();
  require(dt > 0.0 && t >= 0.0, ErrorCode::kInvalidArgument, "invalid time arguments");
  const auto steps = static_cast<std::size_t>(std::llround(t / dt));
  std::vector<PhasePoint> pts(cloud.points().begin(), cloud.points().end());
  const auto w = cloud.weights();
  const std::size_t n = pts.size();
  const double a = spec.alpha;
  const double decay = std::exp(-a * dt);
  const double kick = std::sqrt(1.0 - decay * decay);
  const double em_noise = std::sqrt(2.0 * a * dt);
  for (std::size_t s = 0; s < steps; ++s) {
    if (integrator == LangevinIntegrator::kEulerMaruyama) {
      const detail::InteractionMoments im(spec.interaction, pts, w);
      parallel_for(n, threads, [&](std::size_t k) {
        auto& p = pts[k];
        const double f = spec.potential.gradient(p.x) + im.force(p.x);
        const double xi = detail::counter_normal(seed, k, s);
        const double v = p.v;
        p.x += dt * v;
        p.v = v - dt * (f + a * v) + em_noise * xi;
      });
    } else {
      const detail::InteractionMoments im0(spec.interaction, pts, w);
      parallel_for(n, threads, [&](std::size_t k) {
        auto& p = pts[k];
        p.v -= 0.5 * dt * (spec.potential.gradient(p.x) + im0.force(p.x));
        p.x += 0.5 * dt * p.v;
        p.v = decay * p.v + kick * detail::counter_normal(seed, k, s);
        p.x += 0.5 * dt * p.v;
      });
      const detail::InteractionMoments im1(spec.interaction, pts, w);
      parallel_for(n, threads, [&](std::size_t k) {
        auto& p = pts[k];
        p.v -= 0.5 * dt * (spec.potential.gradient(p.x) + im1.force(p.x));
      });
    }
  }
  return ParticleCloud(std::move(pts), std::vector<double>(w.begin(), w.end()));
}

/// Equal-weight cloud drawn from a Gaussian with the counter-based stream.
inline ParticleCloud sample_gaussian_cloud(const GaussianState& g, std::size_t n, std::uint64_t seed) {
  g.validate();
  require(n > 0, ErrorCode::kInvalidArgument, "need at least one particle");
  // Cholesky factor of the covariance.
  const double l11 = std::sqrt(g.cov[0][0]);
  const double l21 = g.cov[1][0] / l11;
  const double l22 = std::sqrt(g.cov[1][1] - l21 * l21);
  constexpr std::uint64_t kStreamX = ~0ULL, kStreamV = ~1ULL;
  std::vector<PhasePoint> pts(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double z1 = detail::counter_normal(seed, k, kStreamX);
    const double z2 = detail::counter_normal(seed, k, kStreamV);
    pts[k] = {g.mean[0] + l11 * z1, g.mean[1] + l21 * z1 + l22 * z2};
  }
  return ParticleCloud::uniform(std::move(pts));
}

/// Equal-weight cloud drawn from a grid density: a cell by inverse CDF, then a
/// uniform point inside it.
inline ParticleCloud sample_density(const PhaseDensity& mu, std::size_t n, std::uint64_t seed) {
  require(n > 0, ErrorCode::kInvalidArgument, "need at least one particle");
  const auto& g = mu.grid();
  const auto vals = mu.values();
  std::vector<double> cdf(vals.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < vals.size(); ++k) cdf[k] = acc += vals[k];
  constexpr std::uint64_t kCell = ~2ULL, kX = ~3ULL, kV = ~4ULL;
  std::vector<PhasePoint> pts(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = detail::counter_uniform(seed, k, kCell) * acc;
    const auto c = std::min<std::size_t>(
        static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()),
        vals.size() - 1);
    const std::size_t i = c / g.v.size(), j = c % g.v.size();
    pts[k] = {g.x.edge(i) + g.x.spacing() * detail::counter_uniform(seed, k, kX),
              g.v.edge(j) + g.v.spacing() * detail::counter_uniform(seed, k, kV)};
  }
  return ParticleCloud::uniform(std::move(pts));
}

/// Nearest-cell histogram of a cloud; particles outside the box go to the
/// closest boundary cell.
inline PhaseDensity histogram(const ParticleCloud& cloud, const PhaseGrid& grid) {
  std::vector<double> rho(grid.size(), 0.0);
  const auto pts = cloud.points();
  const auto w = cloud.weights();
  auto bin = [](const Grid1D& g, double x) {
    const double s = std::floor((x - g.lower()) / g.spacing());
    return static_cast<std::size_t>(std::clamp(s, 0.0, static_cast<double>(g.size() - 1)));
  };
  for (std::size_t k = 0; k < cloud.size(); ++k)
    rho[grid.index(bin(grid.x, pts[k].x), bin(grid.v, pts[k].v))] += w[k];
  return PhaseDensity::normalized(grid, std::move(rho));
}

}  // namespace vfp
