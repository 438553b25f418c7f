#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vfp/error.hpp"
#include "vfp/grid.hpp"
#include "vfp/phase_space.hpp"

namespace vfp {

namespace detail {

// Horner evaluation of sum c[k] x^k and its first two derivatives.
inline double poly(const std::vector<double>& c, double x) {
  double s = 0.0;
  for (std::size_t k = c.size(); k-- > 0;) s = s * x + c[k];
  return s;
}
inline double poly_d1(const std::vector<double>& c, double x) {
  double s = 0.0;
  for (std::size_t k = c.size(); k-- > 1;) s = s * x + static_cast<double>(k) * c[k];
  return s;
}
inline double poly_d2(const std::vector<double>& c, double x) {
  double s = 0.0;
  for (std::size_t k = c.size(); k-- > 2;) s = s * x + static_cast<double>(k * (k - 1)) * c[k];
  return s;
}

// sup of |f| on [lo, hi] by dense sampling; f is a low-degree polynomial.
template <class F>
double sup_abs(F&& f, double lo, double hi) {
  constexpr int kSamples = 20000;
  double best = std::max(std::abs(f(lo)), std::abs(f(hi)));
  for (int k = 1; k < kSamples; ++k)
    best = std::max(best, std::abs(f(lo + (hi - lo) * k / kSamples)));
  return best;
}

}  // namespace detail

/// Confinement potential V.
class PotentialSpec {
 public:
  enum class Kind { kZero, kHarmonic, kDoubleWell, kPolynomial };

  static PotentialSpec zero() { return PotentialSpec(Kind::kZero, {}); }
  /// V = lambda x^2 / 2.
  static PotentialSpec harmonic(double lambda) {
    require(lambda > 0.0 && std::isfinite(lambda), ErrorCode::kInvalidArgument,
            "harmonic stiffness must be positive");
    return PotentialSpec(Kind::kHarmonic, {0.0, 0.0, 0.5 * lambda}, lambda);
  }
  /// V = (a/4) x^4 - (b/2) x^2.
  static PotentialSpec double_well(double a, double b) {
    require(std::isfinite(a) && std::isfinite(b), ErrorCode::kInvalidArgument,
            "double-well parameters must be finite");
    return PotentialSpec(Kind::kDoubleWell, {0.0, 0.0, -0.5 * b, 0.0, 0.25 * a}, 0.0, a, b);
  }
  /// V = sum c[k] x^k.
  static PotentialSpec polynomial(std::vector<double> coefficients) {
    for (double c : coefficients)
      require(std::isfinite(c), ErrorCode::kInvalidArgument, "polynomial coefficients must be finite");
    return PotentialSpec(Kind::kPolynomial, std::move(coefficients));
  }

  Kind kind() const { return kind_; }
  double lambda() const { return lambda_; }
  double a() const { return a_; }
  double b() const { return b_; }
  const std::vector<double>& coefficients() const { return c_; }

  double value(double x) const { return detail::poly(c_, x); }
  double gradient(double x) const { return detail::poly_d1(c_, x); }
  double hessian(double x) const { return detail::poly_d2(c_, x); }

  /// sup |V''| on [lo, hi]; exact for the named kinds.
  double lipschitz_on(double lo, double hi) const {
    switch (kind_) {
      case Kind::kZero: return 0.0;
      case Kind::kHarmonic: return lambda_;
      case Kind::kDoubleWell: {
        const double xm = std::max(std::abs(lo), std::abs(hi));
        const double inner = (lo <= 0.0 && hi >= 0.0) ? std::abs(b_) : 0.0;
        const double xn = (lo <= 0.0 && hi >= 0.0) ? 0.0 : std::min(std::abs(lo), std::abs(hi));
        return std::max({inner, std::abs(3.0 * a_ * xm * xm - b_), std::abs(3.0 * a_ * xn * xn - b_)});
      }
      case Kind::kPolynomial:
        return detail::sup_abs([&](double x) { return hessian(x); }, lo, hi);
    }
    return 0.0;
  }

 private:
  PotentialSpec(Kind kind, std::vector<double> c, double lambda = 0.0, double a = 0.0, double b = 0.0)
      : kind_(kind), c_(std::move(c)), lambda_(lambda), a_(a), b_(b) {}

  Kind kind_;
  std::vector<double> c_;
  double lambda_;
  double a_;
  double b_;
};

/// Even interaction potential W. Only even powers can be represented, so
/// W(x) = W(-x) holds by construction.
class InteractionSpec {
 public:
  enum class Kind { kNone, kHarmonic, kPolynomial };

  static InteractionSpec none() { return InteractionSpec(Kind::kNone, {}); }
  /// W = kappa x^2 / 2.
  static InteractionSpec harmonic(double kappa) {
    require(std::isfinite(kappa), ErrorCode::kInvalidArgument, "interaction strength must be finite");
    return InteractionSpec(Kind::kHarmonic, {0.0, 0.5 * kappa}, kappa);
  }
  /// W = sum e[k] x^(2k).
  static InteractionSpec even_polynomial(std::vector<double> even_coefficients) {
    for (double c : even_coefficients)
      require(std::isfinite(c), ErrorCode::kInvalidArgument, "polynomial coefficients must be finite");
    return InteractionSpec(Kind::kPolynomial, std::move(even_coefficients));
  }

  Kind kind() const { return kind_; }
  bool present() const { return kind_ != Kind::kNone; }
  double kappa() const { return kappa_; }
  const std::vector<double>& even_coefficients() const { return e_; }
  /// Full coefficient list in powers of x (odd entries zero).
  std::vector<double> coefficients() const {
    std::vector<double> c(e_.empty() ? 0 : 2 * e_.size() - 1, 0.0);
    for (std::size_t k = 0; k < e_.size(); ++k) c[2 * k] = e_[k];
    return c;
  }

  double value(double x) const {
    const double y = x * x;
    double s = 0.0;
    for (std::size_t k = e_.size(); k-- > 0;) s = s * y + e_[k];
    return s;
  }
  double gradient(double x) const {
    // d/dx sum e_k x^(2k) = x * sum 2k e_k x^(2k-2)
    const double y = x * x;
    double s = 0.0;
    for (std::size_t k = e_.size(); k-- > 1;) s = s * y + 2.0 * static_cast<double>(k) * e_[k];
    return x * s;
  }
  double hessian(double x) const { return detail::poly_d2(coefficients(), x); }

  /// sup |W''| over differences of points in [lo, hi].
  double lipschitz_on(double lo, double hi) const {
    if (kind_ == Kind::kNone) return 0.0;
    if (kind_ == Kind::kHarmonic) return std::abs(kappa_);
    const double span = hi - lo;
    return detail::sup_abs([&](double x) { return hessian(x); }, -span, span);
  }

 private:
  InteractionSpec(Kind kind, std::vector<double> e, double kappa = 0.0)
      : kind_(kind), e_(std::move(e)), kappa_(kappa) {}

  Kind kind_;
  std::vector<double> e_;
  double kappa_;
};

struct ModelSpec {
  PotentialSpec potential = PotentialSpec::zero();
  InteractionSpec interaction = InteractionSpec::none();
  double alpha = 1.0;
  double lipschitz_M = 0.0;

  void validate(bool allow_zero_friction = false) const {
    require(std::isfinite(alpha) && (alpha > 0.0 || (allow_zero_friction && alpha == 0.0)),
            ErrorCode::kInvalidArgument, "friction alpha must be positive");
    require(std::isfinite(lipschitz_M) && lipschitz_M >= 0.0, ErrorCode::kInvalidArgument,
            "Lipschitz bound must be nonnegative");
  }
};

/// Model with M derived from the potentials on the x-extent of `grid`.
inline ModelSpec make_model(PotentialSpec potential, InteractionSpec interaction, double alpha,
                            const Grid1D& x_grid) {
  ModelSpec m{std::move(potential), std::move(interaction), alpha, 0.0};
  m.lipschitz_M = std::max(m.potential.lipschitz_on(x_grid.lower(), x_grid.upper()),
                           m.interaction.lipschitz_on(x_grid.lower(), x_grid.upper()));
  m.validate();
  return m;
}

/// (grad W * Pi^x mu) at every x-cell center by direct summation.
inline std::vector<double> convolved_force(const PhaseDensity& mu, const InteractionSpec& w) {
  const Grid1D& gx = mu.grid().x;
  std::vector<double> out(gx.size(), 0.0);
  if (!w.present()) return out;
  const Marginal1D px = marginal(mu, Axis::kX);
  for (std::size_t i = 0; i < gx.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < gx.size(); ++k)
      if (px[k] != 0.0) s += w.gradient(gx.center(i) - gx.center(k)) * px[k];
    out[i] = s * gx.spacing();
  }
  return out;
}

/// (grad W * Pi^x mu) at every particle.
inline std::vector<double> convolved_force(const ParticleCloud& cloud, const InteractionSpec& w) {
  std::vector<double> out(cloud.size(), 0.0);
  if (!w.present()) return out;
  const auto pts = cloud.points();
  const auto wt = cloud.weights();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < cloud.size(); ++k) s += w.gradient(pts[i].x - pts[k].x) * wt[k];
    out[i] = s;
  }
  return out;
}

/// Frozen velocity-step force grad V + grad W * Pi^x mu on the x-grid.
inline std::vector<double> total_force(const PhaseDensity& mu, const ModelSpec& spec) {
  auto f = convolved_force(mu, spec.interaction);
  const Grid1D& gx = mu.grid().x;
  for (std::size_t i = 0; i < gx.size(); ++i) f[i] += spec.potential.gradient(gx.center(i));
  return f;
}

/// Energy terms. The internal part (and hence the Hamiltonian) is absent for
/// measures without density, standing for +infinity.
struct EnergyBreakdown {
  double potential_part = 0.0;
  double interaction_part = 0.0;
  std::optional<double> internal_part;
  std::optional<double> hamiltonian;
  double lin_v = 0.0;
  double lin_x = 0.0;
};

inline EnergyBreakdown energies(const PhaseDensity& mu, const ModelSpec& spec) {
  const auto& g = mu.grid();
  const double dx = g.x.spacing();
  EnergyBreakdown e;
  const auto force = total_force(mu, spec);
  double pot = 0.0, lv = 0.0, lx = 0.0;
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    const double x = g.x.center(i);
    const double vx = spec.potential.value(x);
    const auto row = mu.row(i);
    for (std::size_t j = 0; j < g.v.size(); ++j) {
      const double r = row[j];
      if (r == 0.0) continue;
      const double v = g.v.center(j);
      pot += (vx + 0.5 * v * v) * r;
      lv += v * force[i] * r;
      lx += x * v * r;
    }
  }
  const double da = g.cell_area();
  e.potential_part = pot * da;
  e.lin_v = lv * da;
  e.lin_x = lx * da;
  if (spec.interaction.present()) {
    const Marginal1D px = marginal(mu, Axis::kX);
    double s = 0.0;
    for (std::size_t i = 0; i < g.x.size(); ++i) {
      if (px[i] == 0.0) continue;
      for (std::size_t k = 0; k < g.x.size(); ++k)
        if (px[k] != 0.0) s += spec.interaction.value(g.x.center(i) - g.x.center(k)) * px[i] * px[k];
    }
    e.interaction_part = 0.5 * s * dx * dx;
  }
  e.internal_part = entropy(mu);
  e.hamiltonian = e.potential_part + e.interaction_part + *e.internal_part;
  return e;
}

inline EnergyBreakdown energies(const ParticleCloud& cloud, const ModelSpec& spec) {
  EnergyBreakdown e;
  const auto pts = cloud.points();
  const auto w = cloud.weights();
  const auto conv = convolved_force(cloud, spec.interaction);
  for (std::size_t k = 0; k < cloud.size(); ++k) {
    const double x = pts[k].x, v = pts[k].v;
    e.potential_part += w[k] * (spec.potential.value(x) + 0.5 * v * v);
    e.lin_v += w[k] * v * (spec.potential.gradient(x) + conv[k]);
    e.lin_x += w[k] * x * v;
  }
  if (spec.interaction.present()) {
    double s = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i)
      for (std::size_t k = 0; k < cloud.size(); ++k)
        s += spec.interaction.value(pts[i].x - pts[k].x) * w[i] * w[k];
    e.interaction_part = 0.5 * s;
  }
  return e;
}

struct VSlopes {
  double slope_LvaH;
  double slope_H;
};

inline VSlopes v_slope(const PhaseDensity& mu, const ModelSpec& spec, double gradient_floor) {
  const auto& g = mu.grid();
  const auto grad = v_log_gradient(mu, gradient_floor);
  const auto force = total_force(mu, spec);
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    const auto row = mu.row(i);
    for (std::size_t j = 0; j < g.v.size(); ++j) {
      const double r = row[j];
      if (r == 0.0) continue;
      const double w = g.v.center(j) + grad[g.index(i, j)];
      const double u = force[i] + spec.alpha * w;
      a += u * u * r;
      b += w * w * r;
    }
  }
  const double da = g.cell_area();
  return {std::sqrt(a * da), std::sqrt(b * da)};
}

inline VSlopes v_slope(const PhaseDensity& mu, const ModelSpec& spec) {
  return v_slope(mu, spec, default_gradient_floor(mu));
}

/// x-slopes of the potential and interaction energies, the L2(mu) norms of
/// grad V and grad W * Pi^x mu.
struct XSlopes {
  double potential;
  double interaction;
  /// L2(mu) norm of the sum, the frozen velocity-step force.
  double total;
};

inline XSlopes x_slopes(const PhaseDensity& mu, const ModelSpec& spec) {
  const auto& g = mu.grid();
  const Marginal1D px = marginal(mu, Axis::kX);
  const auto conv = convolved_force(mu, spec.interaction);
  double sv = 0.0, sw = 0.0, st = 0.0;
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    const double gv = spec.potential.gradient(g.x.center(i));
    const double m = px.mass(i);
    sv += gv * gv * m;
    sw += conv[i] * conv[i] * m;
    st += (gv + conv[i]) * (gv + conv[i]) * m;
  }
  return {std::sqrt(sv), std::sqrt(sw), std::sqrt(st)};
}

/// |centered difference of (V + W) along the (v, -x) flow - (L_v - L_x)|.
inline double poisson_bracket_residual(const ParticleCloud& cloud, const ModelSpec& spec,
                                       double dt_fd) {
  require(dt_fd > 0.0, ErrorCode::kInvalidArgument, "finite-difference step must be positive");
  auto flow = [&](double dt) {
    std::vector<PhasePoint> pts(cloud.points().begin(), cloud.points().end());
    for (auto& p : pts) {
      const double xm = p.x + 0.5 * dt * p.v;
      const double vm = p.v - 0.5 * dt * p.x;
      p.x += dt * vm;
      p.v -= dt * xm;
    }
    return ParticleCloud(std::move(pts), std::vector<double>(cloud.weights().begin(),
                                                             cloud.weights().end()));
  };
  auto energy = [&](const ParticleCloud& c) {
    const auto e = energies(c, spec);
    return e.potential_part + e.interaction_part;
  };
  const double fd = (energy(flow(dt_fd)) - energy(flow(-dt_fd))) / (2.0 * dt_fd);
  const auto e0 = energies(cloud, spec);
  return std::abs(fd - (e0.lin_v - e0.lin_x));
}

}  // namespace vfp
