#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vfp/error.hpp"
#include "vfp/grid.hpp"

namespace vfp {

inline constexpr double kDefaultMassTolerance = 1e-10;
/// Fibers whose marginal mass is below this are treated as empty.
inline constexpr double kFiberFloor = 1e-14;
/// Guard for log(0) in the entropy; never changes a representable density.
inline constexpr double kEntropyFloor = 1e-300;
/// Relative floor used by v_log_gradient when no explicit floor is given.
inline constexpr double kRelativeGradientFloor = 1e-12;

/// Cell-centered probability density on a phase grid. Immutable after
/// construction; the constructor validates positivity and unit mass.
class PhaseDensity {
 public:
  PhaseDensity(PhaseGrid grid, std::vector<double> rho,
               double mass_tolerance = kDefaultMassTolerance)
      : grid_(std::move(grid)), rho_(std::move(rho)), mass_tolerance_(mass_tolerance) {
    require(rho_.size() == grid_.size(), ErrorCode::kInvalidArgument,
            "density has " + std::to_string(rho_.size()) + " values, grid has " +
                std::to_string(grid_.size()));
    double sum = 0.0;
    for (double r : rho_) {
      require(std::isfinite(r) && r >= 0.0, ErrorCode::kInvalidArgument,
              "density values must be finite and nonnegative");
      sum += r;
    }
    const double mass = sum * grid_.cell_area();
    require(std::abs(mass - 1.0) <= mass_tolerance_, ErrorCode::kMassMismatch,
            "density mass " + std::to_string(mass) + " differs from 1");
  }

  /// Rescales arbitrary nonnegative values to unit mass. The applied factor is
  /// written to `factor` when requested.
  static PhaseDensity normalized(PhaseGrid grid, std::vector<double> rho,
                                 double* factor = nullptr,
                                 double mass_tolerance = kDefaultMassTolerance) {
    double sum = 0.0;
    for (double& r : rho) {
      if (r < 0.0) r = 0.0;
      sum += r;
    }
    const double mass = sum * grid.cell_area();
    require(mass > 0.0 && std::isfinite(mass), ErrorCode::kInvalidArgument,
            "cannot normalize a density with zero or non-finite mass");
    const double scale = 1.0 / mass;
    for (double& r : rho) r *= scale;
    if (factor) *factor = scale;
    return PhaseDensity(std::move(grid), std::move(rho), mass_tolerance);
  }

  /// Samples f at cell centers and normalizes.
  static PhaseDensity from_function(const PhaseGrid& grid,
                                    const std::function<double(double, double)>& f) {
    std::vector<double> rho(grid.size());
    for (std::size_t i = 0; i < grid.x.size(); ++i)
      for (std::size_t j = 0; j < grid.v.size(); ++j)
        rho[grid.index(i, j)] = f(grid.x.center(i), grid.v.center(j));
    return normalized(grid, std::move(rho));
  }

  const PhaseGrid& grid() const { return grid_; }
  std::span<const double> values() const { return rho_; }
  double at(std::size_t i, std::size_t j) const { return rho_[grid_.index(i, j)]; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(rho_).subspan(i * grid_.v.size(), grid_.v.size());
  }
  double mass_tolerance() const { return mass_tolerance_; }
  double mass() const {
    return std::accumulate(rho_.begin(), rho_.end(), 0.0) * grid_.cell_area();
  }
  double max_value() const { return *std::max_element(rho_.begin(), rho_.end()); }

 private:
  PhaseGrid grid_;
  std::vector<double> rho_;
  double mass_tolerance_;
};

struct PhasePoint {
  double x;
  double v;
};

/// Weighted point masses in phase space.
class ParticleCloud {
 public:
  ParticleCloud(std::vector<PhasePoint> points, std::vector<double> weights)
      : points_(std::move(points)), weights_(std::move(weights)) {
    require(!points_.empty(), ErrorCode::kInvalidArgument, "particle cloud is empty");
    require(points_.size() == weights_.size(), ErrorCode::kInvalidArgument,
            "points and weights differ in length");
    // Compensated sum: large uniform clouds would otherwise drift past the tolerance.
    double sum = 0.0, carry = 0.0;
    for (double w : weights_) {
      require(std::isfinite(w) && w > 0.0, ErrorCode::kInvalidArgument,
              "particle weights must be positive");
      const double y = w - carry;
      const double t = sum + y;
      carry = (t - sum) - y;
      sum = t;
    }
    require(std::abs(sum - 1.0) <= 1e-12, ErrorCode::kMassMismatch,
            "particle weights sum to " + std::to_string(sum));
  }

  static ParticleCloud uniform(std::vector<PhasePoint> points) {
    const double w = 1.0 / static_cast<double>(points.size());
    std::vector<double> weights(points.size(), w);
    return ParticleCloud(std::move(points), std::move(weights));
  }

  std::size_t size() const { return points_.size(); }
  std::span<const PhasePoint> points() const { return points_; }
  std::span<const double> weights() const { return weights_; }

 private:
  std::vector<PhasePoint> points_;
  std::vector<double> weights_;
};

/// One-dimensional density on a grid: sum(p) * spacing == 1.
class Marginal1D {
 public:
  Marginal1D(Grid1D grid, std::vector<double> p, double mass_tolerance = kDefaultMassTolerance)
      : grid_(std::move(grid)), p_(std::move(p)) {
    require(p_.size() == grid_.size(), ErrorCode::kInvalidArgument,
            "marginal length does not match its grid");
    double sum = 0.0;
    for (double q : p_) {
      require(std::isfinite(q) && q >= 0.0, ErrorCode::kInvalidArgument,
              "marginal values must be finite and nonnegative");
      sum += q;
    }
    require(std::abs(sum * grid_.spacing() - 1.0) <= mass_tolerance, ErrorCode::kMassMismatch,
            "marginal mass " + std::to_string(sum * grid_.spacing()) + " differs from 1");
  }

  /// Builds a marginal from cell masses (not densities), normalizing them.
  static Marginal1D from_masses(Grid1D grid, std::span<const double> masses) {
    double total = 0.0;
    for (double m : masses) total += std::max(m, 0.0);
    require(total > 0.0, ErrorCode::kInvalidArgument, "marginal masses sum to zero");
    std::vector<double> p(masses.size());
    const double scale = 1.0 / (total * grid.spacing());
    for (std::size_t k = 0; k < masses.size(); ++k) p[k] = std::max(masses[k], 0.0) * scale;
    return Marginal1D(std::move(grid), std::move(p));
  }

  const Grid1D& grid() const { return grid_; }
  std::span<const double> values() const { return p_; }
  double operator[](std::size_t k) const { return p_[k]; }
  std::size_t size() const { return p_.size(); }
  double mass(std::size_t k) const { return p_[k] * grid_.spacing(); }
  std::vector<double> masses() const {
    std::vector<double> m(p_.size());
    for (std::size_t k = 0; k < p_.size(); ++k) m[k] = mass(k);
    return m;
  }
  double mean() const {
    double s = 0.0;
    for (std::size_t k = 0; k < p_.size(); ++k) s += grid_.center(k) * mass(k);
    return s;
  }
  double variance() const {
    const double m = mean();
    double s = 0.0;
    for (std::size_t k = 0; k < p_.size(); ++k) {
      const double d = grid_.center(k) - m;
      s += d * d * mass(k);
    }
    return s;
  }

 private:
  Grid1D grid_;
  std::vector<double> p_;
};

/// Marginal along `axis`: sums the other axis.
inline Marginal1D marginal(const PhaseDensity& mu, Axis axis) {
  const auto& g = mu.grid();
  if (axis == Axis::kX) {
    std::vector<double> p(g.x.size(), 0.0);
    for (std::size_t i = 0; i < g.x.size(); ++i) {
      double s = 0.0;
      for (double r : mu.row(i)) s += r;
      p[i] = s * g.v.spacing();
    }
    return Marginal1D(g.x, std::move(p), 10 * mu.mass_tolerance());
  }
  std::vector<double> p(g.v.size(), 0.0);
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    const auto row = mu.row(i);
    for (std::size_t j = 0; j < g.v.size(); ++j) p[j] += row[j];
  }
  for (double& q : p) q *= g.x.spacing();
  return Marginal1D(g.v, std::move(p), 10 * mu.mass_tolerance());
}

/// Conditional family with respect to the marginal along `fixed`. Entry k is
/// empty when the fixed-axis marginal mass of cell k is at or below kFiberFloor.
struct Disintegration {
  Axis fixed;
  Marginal1D fixed_marginal;
  std::vector<std::optional<Marginal1D>> conditionals;
};

/// Raw values of the fiber through cell k of the fixed axis (not normalized).
inline std::vector<double> fiber_values(const PhaseDensity& mu, Axis fixed, std::size_t k) {
  const auto& g = mu.grid();
  if (fixed == Axis::kX) {
    const auto row = mu.row(k);
    return {row.begin(), row.end()};
  }
  std::vector<double> col(g.x.size());
  for (std::size_t i = 0; i < g.x.size(); ++i) col[i] = mu.at(i, k);
  return col;
}

inline Disintegration disintegrate(const PhaseDensity& mu, Axis fixed) {
  const auto& g = mu.grid();
  const Grid1D& other = fixed == Axis::kX ? g.v : g.x;
  Marginal1D fm = marginal(mu, fixed);
  std::vector<std::optional<Marginal1D>> conds;
  conds.reserve(fm.size());
  for (std::size_t k = 0; k < fm.size(); ++k) {
    if (fm.mass(k) <= kFiberFloor) {
      conds.emplace_back(std::nullopt);
      continue;
    }
    auto vals = fiber_values(mu, fixed, k);
    double s = 0.0;
    for (double r : vals) s += r;
    const double scale = 1.0 / (s * other.spacing());
    for (double& r : vals) r *= scale;
    conds.emplace_back(Marginal1D(other, std::move(vals)));
  }
  return Disintegration{fixed, std::move(fm), std::move(conds)};
}

struct SecondMoments {
  double m2_x;
  double m2_v;
};

inline SecondMoments second_moments(const PhaseDensity& mu) {
  const auto& g = mu.grid();
  double sx = 0.0, sv = 0.0;
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    const double x = g.x.center(i);
    const auto row = mu.row(i);
    double row_mass = 0.0;
    for (std::size_t j = 0; j < g.v.size(); ++j) {
      const double v = g.v.center(j);
      row_mass += row[j];
      sv += row[j] * v * v;
    }
    sx += row_mass * x * x;
  }
  return {sx * g.cell_area(), sv * g.cell_area()};
}

inline SecondMoments second_moments(const ParticleCloud& cloud) {
  double sx = 0.0, sv = 0.0;
  const auto pts = cloud.points();
  const auto w = cloud.weights();
  for (std::size_t k = 0; k < cloud.size(); ++k) {
    sx += w[k] * pts[k].x * pts[k].x;
    sv += w[k] * pts[k].v * pts[k].v;
  }
  return {sx, sv};
}

struct PhaseMoments {
  double mean_x = 0.0;
  double mean_v = 0.0;
  double cov_xx = 0.0;
  double cov_xv = 0.0;
  double cov_vv = 0.0;
};

inline PhaseMoments phase_moments(const PhaseDensity& mu) {
  const auto& g = mu.grid();
  const double da = g.cell_area();
  PhaseMoments m;
  for (std::size_t i = 0; i < g.x.size(); ++i)
    for (std::size_t j = 0; j < g.v.size(); ++j) {
      const double w = mu.at(i, j) * da;
      m.mean_x += w * g.x.center(i);
      m.mean_v += w * g.v.center(j);
    }
  for (std::size_t i = 0; i < g.x.size(); ++i)
    for (std::size_t j = 0; j < g.v.size(); ++j) {
      const double w = mu.at(i, j) * da;
      const double dx = g.x.center(i) - m.mean_x;
      const double dv = g.v.center(j) - m.mean_v;
      m.cov_xx += w * dx * dx;
      m.cov_xv += w * dx * dv;
      m.cov_vv += w * dv * dv;
    }
  return m;
}

inline PhaseMoments phase_moments(const ParticleCloud& cloud) {
  PhaseMoments m;
  const auto pts = cloud.points();
  const auto w = cloud.weights();
  for (std::size_t k = 0; k < cloud.size(); ++k) {
    m.mean_x += w[k] * pts[k].x;
    m.mean_v += w[k] * pts[k].v;
  }
  for (std::size_t k = 0; k < cloud.size(); ++k) {
    const double dx = pts[k].x - m.mean_x;
    const double dv = pts[k].v - m.mean_v;
    m.cov_xx += w[k] * dx * dx;
    m.cov_xv += w[k] * dx * dv;
    m.cov_vv += w[k] * dv * dv;
  }
  return m;
}

/// Discrete Boltzmann entropy, sum of rho log rho over cells with rho > 0.
inline double entropy(const PhaseDensity& mu) {
  double s = 0.0;
  for (double r : mu.values())
    if (r > 0.0) s += r * std::log(std::max(r, kEntropyFloor));
  return s * mu.grid().cell_area();
}

/// Relative entropy sum rho log(rho / ref); cells where ref vanishes but rho
/// does not make the value infinite, reported as nullopt.
inline std::optional<double> relative_entropy(const PhaseDensity& mu, const PhaseDensity& ref) {
  require(mu.grid() == ref.grid(), ErrorCode::kInvalidArgument, "grids differ");
  double s = 0.0;
  const auto a = mu.values();
  const auto b = ref.values();
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] <= 0.0) continue;
    if (b[k] <= 0.0) return std::nullopt;
    s += a[k] * std::log(a[k] / b[k]);
  }
  return s * mu.grid().cell_area();
}

inline double l1_distance(const PhaseDensity& a, const PhaseDensity& b) {
  require(a.grid() == b.grid(), ErrorCode::kInvalidArgument, "grids differ");
  double s = 0.0;
  const auto va = a.values();
  const auto vb = b.values();
  for (std::size_t k = 0; k < va.size(); ++k) s += std::abs(va[k] - vb[k]);
  return s * a.grid().cell_area();
}

/// Central difference of log(max(rho, floor)) along v, one-sided at the
/// v-boundary; cells with rho <= floor get 0.
inline std::vector<double> v_log_gradient(const PhaseDensity& mu, double floor) {
  require(floor > 0.0, ErrorCode::kInvalidArgument, "gradient floor must be positive");
  const auto& g = mu.grid();
  const std::size_t nv = g.v.size();
  const double dv = g.v.spacing();
  std::vector<double> out(g.size(), 0.0);
  std::vector<double> logs(nv);
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    const auto row = mu.row(i);
    for (std::size_t j = 0; j < nv; ++j) logs[j] = std::log(std::max(row[j], floor));
    for (std::size_t j = 0; j < nv; ++j) {
      if (row[j] <= floor) continue;
      double d;
      if (j == 0) {
        d = (logs[1] - logs[0]) / dv;
      } else if (j + 1 == nv) {
        d = (logs[nv - 1] - logs[nv - 2]) / dv;
      } else {
        d = (logs[j + 1] - logs[j - 1]) / (2.0 * dv);
      }
      out[g.index(i, j)] = d;
    }
  }
  return out;
}

inline double default_gradient_floor(const PhaseDensity& mu) {
  return kRelativeGradientFloor * mu.max_value();
}

inline std::vector<double> v_log_gradient(const PhaseDensity& mu) {
  return v_log_gradient(mu, default_gradient_floor(mu));
}

/// Fraction of the mass sitting in the outermost ring of cells.
inline double boundary_mass_fraction(const PhaseDensity& mu) {
  const auto& g = mu.grid();
  const std::size_t nx = g.x.size(), nv = g.v.size();
  double s = 0.0;
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < nv; ++j)
      if (i == 0 || j == 0 || i + 1 == nx || j + 1 == nv) s += mu.at(i, j);
  return s * g.cell_area();
}

/// Sum of f(x, v) rho over cells (midpoint rule).
template <class F>
double integrate(const PhaseDensity& mu, F&& f) {
  const auto& g = mu.grid();
  double s = 0.0;
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    const double x = g.x.center(i);
    const auto row = mu.row(i);
    for (std::size_t j = 0; j < g.v.size(); ++j)
      if (row[j] != 0.0) s += f(x, g.v.center(j)) * row[j];
  }
  return s * g.cell_area();
}

}  // namespace vfp
