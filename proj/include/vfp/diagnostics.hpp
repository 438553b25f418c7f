#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "vfp/functionals.hpp"
#include "vfp/phase_space.hpp"
#include "vfp/scheme.hpp"

namespace vfp {

/// Itemized slack for the two-sided Hamiltonian bound. Every term is
/// reported separately so a pass is always attributable.
struct BracketSlack {
  /// Entropy change of the shear remap, per unit time.
  double remap = 0.0;
  /// Euler-Lagrange residual times the mid-step slope, per unit time.
  double euler_lagrange = 0.0;
  /// Mass in the outermost cells, per unit time (truncation of the domain).
  double truncation = 0.0;

  double total() const { return remap + euler_lagrange + truncation; }
};

struct DissipationBracket {
  double lower = 0.0;
  double observed = 0.0;
  double upper = 0.0;
  double slack_lower = 0.0;
  double slack_upper = 0.0;
  bool within = false;
  BracketSlack slack;
};

/// Multiple of el_residual * slope / h used in the slack; the residual is an
/// L2 error in the transport map and the slope converts it into energy.
inline constexpr double kElSlackFactor = 2.0;

inline DissipationBracket dissipation_bracket(const StepReport& r, const ModelSpec& spec) {
  const double h = r.h, a = spec.alpha, mm = spec.lipschitz_M;
  DissipationBracket b;
  const double w2 = r.w2v_cost * r.w2v_cost;
  const double m2v = r.moments_after.m2_v;
  const double sh_after = r.slope_after.slope_H, sh_before = r.slope_before.slope_H;
  const double force_sq = r.x_slopes_before.total * r.x_slopes_before.total;
  b.observed = (*r.energies_after.hamiltonian - *r.energies_before.hamiltonian) / h;
  b.upper = -a * sh_after * sh_after - w2 / (2.0 * h) + mm * h * m2v;
  b.lower = -a / (1.0 + a * h) * sh_before * sh_before + w2 / (2.0 * h) -
            h / (1.0 + a * h) * force_sq - mm * h * m2v;
  b.slack.remap = r.entropy_remap_error / h;
  b.slack.euler_lagrange = kElSlackFactor * r.el_residual * r.slope_mid.slope_LvaH / (a * h);
  b.slack.truncation = r.boundary_mass_fraction / h;
  b.slack_lower = b.slack_upper = b.slack.total();
  b.within = b.lower - b.slack_lower <= b.observed && b.observed <= b.upper + b.slack_upper;
  return b;
}

/// Overload taking the states explicitly; the report already carries every
/// quantity evaluated on them.
inline DissipationBracket dissipation_bracket(const PhaseDensity&, const PhaseDensity&,
                                              const PhaseDensity&, const ModelSpec& spec, double h,
                                              const StepReport& report) {
  StepReport r = report;
  r.h = h;
  return dissipation_bracket(r, spec);
}

/// The three-term slope chain of the velocity step:
///   (1+ah) slope_mid^2 <= (1+ah) (W/h)^2 <= slope_before^2 / (1+ah).
struct SlopeChain {
  double mid;
  double transport;
  double before;
};

inline SlopeChain slope_chain(const StepReport& r, double alpha, double h) {
  const double k = 1.0 + alpha * h;
  const double sm = r.slope_mid.slope_LvaH, sb = r.slope_before.slope_LvaH;
  const double w = r.w2v_cost / h;
  return {k * sm * sm, k * w * w, sb * sb / k};
}

inline bool slope_chain_check(const StepReport& r, double alpha, double h, double rel_tol) {
  const auto c = slope_chain(r, alpha, h);
  return c.mid <= (1.0 + rel_tol) * c.transport && c.transport <= (1.0 + rel_tol) * c.before;
}

struct MomentGrowthResult {
  /// One entry per step; empty when the check is skipped.
  std::vector<bool> per_step;
  bool skipped = false;
  std::string reason;

  bool all_pass() const {
    return std::all_of(per_step.begin(), per_step.end(), [](bool b) { return b; });
  }
};

/// E = |d_x W|^2 + |d_x V|^2 + m2_v grows at most geometrically.
inline double growth_energy(const XSlopes& xs, const SecondMoments& m) {
  return xs.interaction * xs.interaction + xs.potential * xs.potential + m.m2_v;
}

inline MomentGrowthResult moment_growth_check(const std::vector<StepReport>& reports,
                                              const ModelSpec& spec) {
  MomentGrowthResult out;
  const double mm = spec.lipschitz_M;
  constexpr double kRoundoff = 1e-12;
  for (const auto& r : reports) {
    const double cap = std::min(0.5, mm > 0.0 ? 1.0 / (2.0 * mm) : 0.5);
    if (r.h > cap) {
      out.per_step.clear();
      out.skipped = true;
      out.reason = "time step " + std::to_string(r.h) + " exceeds min(1/2, 1/(2M)) = " +
                   std::to_string(cap);
      return out;
    }
    const double e0 = growth_energy(r.x_slopes_before, r.moments_before);
    const double e1 = growth_energy(r.x_slopes_after, r.moments_after);
    const double bound = (1.0 + (4.0 + 14.0 * mm) * r.h) * e0 + 16.0 * spec.alpha * r.h;
    out.per_step.push_back(e1 <= bound * (1.0 + kRoundoff));
  }
  return out;
}

inline MomentGrowthResult moment_growth_check(const Trajectory& traj, const ModelSpec& spec) {
  return moment_growth_check(traj.reports, spec);
}

/// Velocity second-moment recursion of the velocity step, with an absolute
/// tolerance for quadrature.
inline bool second_moment_recursion_check(const StepReport& r, double alpha, double tol) {
  const double bound = r.moments_before.m2_v / (1.0 + 2.0 * alpha * r.h) -
                       2.0 * r.h * r.energies_mid.lin_v + 2.0 * alpha * r.h;
  return r.moments_after.m2_v <= bound + tol;
}

struct MetricSpeed {
  std::vector<double> speeds;
  /// sum of speed^2 * h, the discrete AC^2 energy.
  double ac2_energy = 0.0;
};

inline MetricSpeed metric_speed(const std::vector<StepReport>& reports) {
  MetricSpeed m;
  for (const auto& r : reports) {
    const double s = (r.w2v_cost + r.w2x_cost) / r.h;
    m.speeds.push_back(s);
    m.ac2_energy += s * s * r.h;
  }
  return m;
}

inline MetricSpeed metric_speed(const Trajectory& traj) {
  require(!traj.snapshots.empty(), ErrorCode::kInvalidArgument, "trajectory is empty");
  return metric_speed(traj.reports);
}

/// Smooth compactly supported test function
///   phi = (1 - ((x-x0)/rx)^2)^4 (1 - ((v-v0)/rv)^2)^4
/// inside the box, 0 outside.
class BumpTestFunction {
 public:
  BumpTestFunction(double x0, double rx, double v0, double rv) : x0_(x0), rx_(rx), v0_(v0), rv_(rv) {
    require(rx > 0.0 && rv > 0.0, ErrorCode::kInvalidArgument, "bump radii must be positive");
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (int k = -4000; k <= 4000; ++k) {
      const double s = k / 4000.0;
      s0 = std::max(s0, std::abs(f(s)));
      s1 = std::max(s1, std::abs(f1(s)));
      s2 = std::max(s2, std::abs(f2(s)));
    }
    sup_v_ = s0 * s1 / rv;
    sup_vv_ = s0 * s2 / (rv * rv);
    sup_d2_ = std::max({s2 * s0 / (rx * rx), sup_vv_, s1 * s1 / (rx * rv)});
  }

  double value(double x, double v) const { return f(sx(x)) * f(sv(v)); }
  double dx(double x, double v) const { return f1(sx(x)) / rx_ * f(sv(v)); }
  double dv(double x, double v) const { return f(sx(x)) * f1(sv(v)) / rv_; }
  double dvv(double x, double v) const { return f(sx(x)) * f2(sv(v)) / (rv_ * rv_); }

  /// sup |d_vv phi|
  double sup_vv() const { return sup_vv_; }
  /// sup over entries of the Hessian
  double sup_hessian() const { return sup_d2_; }
  double sup_v() const { return sup_v_; }

 private:
  double sx(double x) const { return (x - x0_) / rx_; }
  double sv(double v) const { return (v - v0_) / rv_; }
  static double f(double s) {
    if (std::abs(s) >= 1.0) return 0.0;
    const double q = 1.0 - s * s;
    return q * q * q * q;
  }
  static double f1(double s) {
    if (std::abs(s) >= 1.0) return 0.0;
    const double q = 1.0 - s * s;
    return -8.0 * s * q * q * q;
  }
  static double f2(double s) {
    if (std::abs(s) >= 1.0) return 0.0;
    const double q = 1.0 - s * s;
    return -8.0 * q * q * q + 48.0 * s * s * q * q;
  }

  double x0_, rx_, v0_, rv_;
  double sup_vv_ = 0.0, sup_d2_ = 0.0, sup_v_ = 0.0;
};

struct PdeResidual {
  double residual;
  double bound;
  double transport_term;
  double shear_term;
  double solver_term;
  bool within;
};

/// Weak-form consistency of one step against a test function:
///   |(1/h) int phi d(mu_{i+1} - mu_i) - int [v phi_x - (F + a v) phi_v + a phi_vv] d mu_bar|
/// bounded by ||phi_vv|| W^2/h + ||D^2 phi|| h m2_v + solver slack.
inline PdeResidual pde_residual(const PhaseDensity& mu_i, const PhaseDensity& mu_bar,
                                const PhaseDensity& mu_next, const ModelSpec& spec,
                                const StepReport& r, const BumpTestFunction& phi) {
  const double h = r.h, a = spec.alpha;
  const double lhs = (integrate(mu_next, [&](double x, double v) { return phi.value(x, v); }) -
                      integrate(mu_i, [&](double x, double v) { return phi.value(x, v); })) /
                     h;
  const auto force = total_force(mu_i, spec);
  const auto& g = mu_bar.grid();
  double rhs = 0.0;
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    const double x = g.x.center(i);
    const auto row = mu_bar.row(i);
    for (std::size_t j = 0; j < g.v.size(); ++j) {
      if (row[j] == 0.0) continue;
      const double v = g.v.center(j);
      rhs += (v * phi.dx(x, v) - (force[i] + a * v) * phi.dv(x, v) + a * phi.dvv(x, v)) * row[j];
    }
  }
  rhs *= g.cell_area();
  PdeResidual out;
  out.residual = std::abs(lhs - rhs);
  out.transport_term = phi.sup_vv() * r.w2v_cost * r.w2v_cost / h;
  out.shear_term = phi.sup_hessian() * h * r.moments_mid.m2_v;
  out.solver_term = phi.sup_v() * r.el_residual / h;
  out.bound = out.transport_term + out.shear_term + out.solver_term;
  out.within = out.residual <= out.bound;
  return out;
}

}  // namespace vfp
