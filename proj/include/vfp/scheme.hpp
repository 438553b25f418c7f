#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vfp/error.hpp"
#include "vfp/fiber_jko.hpp"
#include "vfp/fibered_transport.hpp"
#include "vfp/functionals.hpp"
#include "vfp/parallel.hpp"
#include "vfp/phase_space.hpp"
#include "vfp/remap.hpp"

namespace vfp {

struct SchemeConfig {
  /// Uniform step, used when `partition` is empty.
  double h = 0.01;
  std::size_t n_steps = 0;
  /// Explicit step sequence for general time partitions.
  std::vector<double> partition;

  FiberSolver fiber_solver;
  double el_residual_tol = 1e-5;
  double marginal_tolerance = kDefaultMassTolerance;
  double boundary_leak_cap = 1e-6;
  Reconstruction reconstruction = Reconstruction::kPiecewiseConstant;
  /// Relative floor for log-gradients in slope evaluations.
  double gradient_floor = kRelativeGradientFloor;
  int threads = 1;
  /// Keep every k-th state in the trajectory (0 keeps only the endpoints).
  std::size_t snapshot_stride = 0;

  std::vector<double> steps() const {
    if (!partition.empty()) return partition;
    return std::vector<double>(n_steps, h);
  }

  void validate() const {
    for (double s : steps())
      require(s > 0.0 && std::isfinite(s), ErrorCode::kInvalidArgument, "time steps must be positive");
    if (partition.empty())
      require(h > 0.0 && std::isfinite(h), ErrorCode::kInvalidArgument, "time step must be positive");
    require(el_residual_tol > 0.0, ErrorCode::kInvalidArgument, "el_residual_tol must be positive");
    require(marginal_tolerance > 0.0, ErrorCode::kInvalidArgument,
            "marginal_tolerance must be positive");
    require(boundary_leak_cap >= 0.0, ErrorCode::kInvalidArgument,
            "boundary_leak_cap must be nonnegative");
  }
};

struct VelocityStepResult {
  PhaseDensity mu_bar;
  double w2v_cost;
  double max_el_residual;
  bool monotone;
  std::vector<double> force;
};

/// Fiberwise minimization in W2 with the x-marginal fixed and the force frozen
/// at the incoming state.
inline VelocityStepResult velocity_step(const PhaseDensity& mu, const ModelSpec& spec,
                                        const SchemeConfig& cfg, double h) {
  spec.validate();
  const auto& g = mu.grid();
  const auto force = total_force(mu, spec);
  const Marginal1D px = marginal(mu, Axis::kX);
  const std::size_t nx = g.x.size(), nv = g.v.size();
  std::vector<double> rho(mu.values().begin(), mu.values().end());
  std::vector<double> cost(nx, 0.0), el(nx, 0.0);
  std::vector<char> mono(nx, 1);
  parallel_for(nx, cfg.threads, [&](std::size_t i) {
    if (px.mass(i) <= kFiberFloor) return;
    try {
      const auto row = mu.row(i);
      const Marginal1D fiber = Marginal1D::from_masses(g.v, row);
      const auto res = fiber_jko(fiber, force[i], spec.alpha, h, cfg.fiber_solver, cfg.reconstruction);
      for (std::size_t j = 0; j < nv; ++j) rho[g.index(i, j)] = px[i] * res.output[j];
      cost[i] = res.cost_sq;
      el[i] = res.el_residual;
      mono[i] = res.monotone ? 1 : 0;
    } catch (const Error& e) {
      Error::rethrow_with_context(e, "fiber " + std::to_string(i));
    }
  });
  double w2 = 0.0, worst = 0.0;
  bool monotone = true;
  for (std::size_t i = 0; i < nx; ++i) {
    w2 += px.mass(i) * cost[i];
    worst = std::max(worst, el[i]);
    monotone = monotone && mono[i];
  }
  return {PhaseDensity(g, std::move(rho), mu.mass_tolerance()), std::sqrt(w2), worst, monotone,
          force};
}

struct PositionStepResult {
  PhaseDensity mu;
  double w2x_cost;
  double entropy_remap_error;
  double boundary_leak;
  /// Factor applied to restore the pre-step mass (1 when nothing leaked).
  double mass_renorm;
};

/// Exact shear (x, v) -> (x + h v, v) realized by a conservative remap of each
/// v-row. Rows are rescaled to their incoming mass, so the v-marginal is kept.
inline PositionStepResult position_step(const PhaseDensity& mu_bar, double h,
                                        double boundary_leak_cap = 1e-6, int threads = 1) {
  require(h > 0.0 && std::isfinite(h), ErrorCode::kInvalidArgument, "time step must be positive");
  const auto& g = mu_bar.grid();
  const std::size_t nx = g.x.size(), nv = g.v.size();
  std::vector<double> rho(g.size(), 0.0);
  std::vector<double> before(nv, 0.0), after(nv, 0.0);
  parallel_for(nv, threads, [&](std::size_t j) {
    std::vector<double> col(nx);
    for (std::size_t i = 0; i < nx; ++i) col[i] = mu_bar.at(i, j);
    double b = 0.0;
    for (double c : col) b += c;
    before[j] = b;
    if (b == 0.0) return;
    const double shift = h * g.v.center(j) / g.x.spacing();
    auto out = shift == 0.0 ? col : shift_profile(col, shift);
    double a = 0.0;
    for (double c : out) a += c;
    after[j] = a;
    if (a > 0.0 && a != b) {
      const double scale = b / a;
      for (double& c : out) c *= scale;
    }
    for (std::size_t i = 0; i < nx; ++i) rho[g.index(i, j)] = out[i];
  });
  double leak = 0.0, total_before = 0.0, total_after = 0.0;
  for (std::size_t j = 0; j < nv; ++j) {
    require(after[j] > 0.0 || before[j] == 0.0, ErrorCode::kBoundaryLeakExceeded,
            "velocity row " + std::to_string(j) + " left the domain entirely");
    leak += std::max(before[j] - after[j], 0.0);
    total_before += before[j];
    total_after += after[j];
  }
  leak *= g.cell_area();
  require(leak <= boundary_leak_cap, ErrorCode::kBoundaryLeakExceeded,
          "boundary leak " + std::to_string(leak) + " exceeds cap " +
              std::to_string(boundary_leak_cap));
  PhaseDensity out(g, std::move(rho), mu_bar.mass_tolerance());
  const double m2v = second_moments(mu_bar).m2_v;
  const double remap_err = std::abs(entropy(out) - entropy(mu_bar));
  return {std::move(out), h * std::sqrt(m2v), remap_err, leak,
          total_after > 0.0 ? total_before / total_after : 1.0};
}

/// Everything the diagnostics need about one step, evaluated once.
struct StepReport {
  std::size_t step_index = 0;
  double t = 0.0;
  double h = 0.0;
  double w2v_cost = 0.0;
  double w2x_cost = 0.0;
  EnergyBreakdown energies_before, energies_mid, energies_after;
  VSlopes slope_before{}, slope_mid{}, slope_after{};
  SecondMoments moments_before{}, moments_mid{}, moments_after{};
  XSlopes x_slopes_before{}, x_slopes_after{};
  double el_residual = 0.0;
  bool monotone = true;
  double mass_renorm = 1.0;
  double entropy_remap_error = 0.0;
  double boundary_leak = 0.0;
  double boundary_mass_fraction = 0.0;
};

struct Trajectory {
  std::vector<PhaseDensity> snapshots;
  std::vector<std::size_t> snapshot_steps;
  std::vector<StepReport> reports;
  SchemeConfig config;
  ModelSpec model;

  const PhaseDensity& final_state() const { return snapshots.back(); }
};

/// Called after every step with mu_i, the intermediate state, mu_{i+1} and the
/// report.
using StepObserver = std::function<void(const PhaseDensity&, const PhaseDensity&,
                                        const PhaseDensity&, const StepReport&)>;

struct StateSummary {
  EnergyBreakdown energies;
  VSlopes slopes;
  SecondMoments moments;
  XSlopes x_slopes;
};

inline StateSummary summarize(const PhaseDensity& mu, const ModelSpec& spec, double gradient_floor) {
  return {energies(mu, spec), v_slope(mu, spec, gradient_floor * mu.max_value()), second_moments(mu),
          x_slopes(mu, spec)};
}

/// One full step: velocity minimization followed by the shear.
inline StepReport scheme_step(const PhaseDensity& mu, const ModelSpec& spec, const SchemeConfig& cfg,
                              double h, const StateSummary& before,
                              std::optional<PhaseDensity>& mid_out,
                              std::optional<PhaseDensity>& next_out,
                              StateSummary* after_out = nullptr) {
  auto vel = velocity_step(mu, spec, cfg, h);
  auto pos = position_step(vel.mu_bar, h, cfg.boundary_leak_cap, cfg.threads);
  StepReport r;
  r.h = h;
  r.w2v_cost = vel.w2v_cost;
  r.w2x_cost = pos.w2x_cost;
  r.el_residual = vel.max_el_residual;
  r.monotone = vel.monotone;
  r.mass_renorm = pos.mass_renorm;
  r.entropy_remap_error = pos.entropy_remap_error;
  r.boundary_leak = pos.boundary_leak;
  r.boundary_mass_fraction = boundary_mass_fraction(pos.mu);
  const StateSummary mid = summarize(vel.mu_bar, spec, cfg.gradient_floor);
  const StateSummary after = summarize(pos.mu, spec, cfg.gradient_floor);
  r.energies_before = before.energies;
  r.energies_mid = mid.energies;
  r.energies_after = after.energies;
  r.slope_before = before.slopes;
  r.slope_mid = mid.slopes;
  r.slope_after = after.slopes;
  r.moments_before = before.moments;
  r.moments_mid = mid.moments;
  r.moments_after = after.moments;
  r.x_slopes_before = before.x_slopes;
  r.x_slopes_after = after.x_slopes;
  if (after_out) *after_out = after;
  mid_out.emplace(std::move(vel.mu_bar));
  next_out.emplace(std::move(pos.mu));
  return r;
}

inline Trajectory run_scheme(const PhaseDensity& mu0, const ModelSpec& spec, const SchemeConfig& cfg,
                             const StepObserver& observer = {}) {
  spec.validate();
  cfg.validate();
  const auto steps = cfg.steps();
  Trajectory traj{{mu0}, {0}, {}, cfg, spec};
  traj.reports.reserve(steps.size());
  PhaseDensity current = mu0;
  StateSummary summary = summarize(current, spec, cfg.gradient_floor);
  double t = 0.0;
  for (std::size_t s = 0; s < steps.size(); ++s) {
    std::optional<PhaseDensity> mid, next;
    StateSummary after;
    StepReport r;
    try {
      r = scheme_step(current, spec, cfg, steps[s], summary, mid, next, &after);
    } catch (const Error& e) {
      Error::rethrow_with_context(e, "step " + std::to_string(s));
    }
    t += steps[s];
    r.step_index = s;
    r.t = t;
    if (observer) observer(current, *mid, *next, r);
    traj.reports.push_back(r);
    current = std::move(*next);
    summary = after;
    const bool last = s + 1 == steps.size();
    if (last || (cfg.snapshot_stride > 0 && (s + 1) % cfg.snapshot_stride == 0)) {
      traj.snapshots.push_back(current);
      traj.snapshot_steps.push_back(s + 1);
    }
  }
  return traj;
}

/// Closed-form step of the damped symplectic Euler scheme for point masses.
/// alpha = 0 is accepted here and gives plain symplectic Euler.
inline ParticleCloud particle_step(const ParticleCloud& cloud, const ModelSpec& spec, double h) {
  spec.validate(/*allow_zero_friction=*/true);
  require(h > 0.0 && std::isfinite(h), ErrorCode::kInvalidArgument, "time step must be positive");
  const auto conv = convolved_force(cloud, spec.interaction);
  std::vector<PhasePoint> pts(cloud.points().begin(), cloud.points().end());
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double f = spec.potential.gradient(pts[k].x) + conv[k];
    const double v = (pts[k].v - h * f) / (1.0 + spec.alpha * h);
    pts[k].v = v;
    pts[k].x += h * v;
  }
  return ParticleCloud(std::move(pts),
                       std::vector<double>(cloud.weights().begin(), cloud.weights().end()));
}

}  // namespace vfp
