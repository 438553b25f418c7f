#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vfp/error.hpp"
#include "vfp/parallel.hpp"
#include "vfp/phase_space.hpp"

namespace vfp {

/// How a gridded fiber is read as a measure for transport purposes.
/// kPiecewiseConstant spreads each cell's mass uniformly over the cell;
/// kAtomic puts it on the cell center.
enum class Reconstruction { kPiecewiseConstant, kAtomic };

namespace detail {

// One monotone piece of a quantile function: s in [s0, s1] maps linearly
// onto [x0, x1] (x0 == x1 for atoms).
struct QuantilePiece {
  double s0, s1, x0, x1;
  double at(double s) const {
    if (x0 == x1 || s1 <= s0) return x0;
    return x0 + (s - s0) / (s1 - s0) * (x1 - x0);
  }
};

inline std::vector<QuantilePiece> quantile_pieces(const Grid1D& grid, std::span<const double> masses,
                                                  Reconstruction rec) {
  double total = 0.0;
  for (double m : masses) total += m;
  std::vector<QuantilePiece> out;
  out.reserve(masses.size());
  double c = 0.0;
  for (std::size_t j = 0; j < masses.size(); ++j) {
    if (masses[j] <= 0.0) continue;
    const double next = c + masses[j] / total;
    if (rec == Reconstruction::kAtomic)
      out.push_back({c, next, grid.center(j), grid.center(j)});
    else
      out.push_back({c, next, grid.edge(j), grid.edge(j + 1)});
    c = next;
  }
  if (!out.empty()) out.back().s1 = 1.0;
  return out;
}

// Calls visit(s0, s1, p0, p1, q0, q1) on every common refinement segment of
// two quantile functions; p and q are linear on each segment.
template <class Visit>
void merge_quantiles(const std::vector<QuantilePiece>& p, const std::vector<QuantilePiece>& q,
                     Visit&& visit) {
  std::size_t a = 0, b = 0;
  double s = 0.0;
  while (a < p.size() && b < q.size()) {
    const double end = std::min(p[a].s1, q[b].s1);
    if (end > s) visit(s, end, p[a].at(s), p[a].at(end), q[b].at(s), q[b].at(end));
    s = std::max(s, end);
    if (p[a].s1 <= s) ++a;
    if (b < q.size() && q[b].s1 <= s) ++b;
  }
}

inline double segment_sq(double len, double d0, double d1) {
  return len * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
}

}  // namespace detail

/// Monotone transport between two fibers on a common grid.
struct FiberTransport {
  Marginal1D source;
  Marginal1D target;
  /// Image of each source cell center (for empty cells, the image of the
  /// adjacent quantile level, which keeps the sequence monotone).
  std::vector<double> map_values;
  double cost_sq;
  Reconstruction reconstruction;
};

/// Squared 1D Wasserstein distance between two mass vectors on one grid.
inline double w2_sq_1d(const Grid1D& grid, std::span<const double> p, std::span<const double> q,
                       Reconstruction rec = Reconstruction::kPiecewiseConstant) {
  const auto pp = detail::quantile_pieces(grid, p, rec);
  const auto qq = detail::quantile_pieces(grid, q, rec);
  double cost = 0.0;
  detail::merge_quantiles(pp, qq, [&](double s0, double s1, double p0, double p1, double q0,
                                      double q1) {
    cost += detail::segment_sq(s1 - s0, p0 - q0, p1 - q1);
  });
  return cost;
}

inline FiberTransport quantile_ot_1d(const Marginal1D& p, const Marginal1D& q,
                                     Reconstruction rec = Reconstruction::kPiecewiseConstant,
                                     double tolerance = kDefaultMassTolerance) {
  require(p.grid() == q.grid(), ErrorCode::kInvalidArgument, "fibers live on different grids");
  const double mp = std::accumulate(p.values().begin(), p.values().end(), 0.0) * p.grid().spacing();
  const double mq = std::accumulate(q.values().begin(), q.values().end(), 0.0) * q.grid().spacing();
  require(std::abs(mp - mq) <= tolerance, ErrorCode::kMassMismatch,
          "fiber masses differ by " + std::to_string(std::abs(mp - mq)));
  const auto pm = p.masses();
  const auto qm = q.masses();
  const Grid1D& g = p.grid();
  const auto pp = detail::quantile_pieces(g, pm, rec);
  const auto qq = detail::quantile_pieces(g, qm, rec);

  // Per source cell: cost accumulation plus the map value (median image for
  // the uniform reconstruction, barycenter for atoms).
  double cost = 0.0;
  detail::merge_quantiles(pp, qq, [&](double s0, double s1, double p0, double p1, double q0,
                                      double q1) {
    cost += detail::segment_sq(s1 - s0, p0 - q0, p1 - q1);
  });

  auto target_at = [&](double s) {
    auto it = std::lower_bound(qq.begin(), qq.end(), s,
                               [](const detail::QuantilePiece& piece, double v) { return piece.s1 < v; });
    if (it == qq.end()) --it;
    return it->at(std::clamp(s, it->s0, it->s1));
  };

  std::vector<double> map(g.size());
  double total = std::accumulate(pm.begin(), pm.end(), 0.0);
  double c = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double m = pm[j] / total;
    if (rec == Reconstruction::kPiecewiseConstant || m <= 0.0) {
      map[j] = target_at(std::min(c + 0.5 * m, 1.0));
    } else {
      // Barycentric projection: average of the target quantile over [c, c + m].
      double acc = 0.0;
      const double end = std::min(c + m, 1.0);
      for (const auto& piece : qq) {
        const double a = std::max(c, piece.s0), b = std::min(end, piece.s1);
        if (b > a) acc += (b - a) * 0.5 * (piece.at(a) + piece.at(b));
      }
      map[j] = acc / (end - c);
    }
    c += m;
  }
  return FiberTransport{p, q, std::move(map), cost, rec};
}

/// Fibered distance with one marginal held fixed. The value is absent when the
/// fixed marginals differ, which stands for an infinite distance.
struct FiberedDistanceReport {
  std::optional<double> value;
  std::vector<double> per_fiber_cost_sq;
  std::vector<double> fiber_weights;
  bool matched_marginals = false;
  double marginal_discrepancy = 0.0;

  bool finite() const { return value.has_value(); }
  double squared() const { return *value * *value; }
};

namespace detail {

inline FiberedDistanceReport fibered_distance(const PhaseDensity& mu, const PhaseDensity& nu,
                                              Axis fixed, double marginal_tolerance,
                                              Reconstruction rec, int threads) {
  require(mu.grid() == nu.grid(), ErrorCode::kInvalidArgument, "densities live on different grids");
  const auto& g = mu.grid();
  const Marginal1D a = marginal(mu, fixed);
  const Marginal1D b = marginal(nu, fixed);
  FiberedDistanceReport rep;
  double diff = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) diff += std::abs(a[k] - b[k]);
  rep.marginal_discrepancy = diff * a.grid().spacing();
  rep.per_fiber_cost_sq.assign(a.size(), 0.0);
  rep.fiber_weights.assign(a.size(), 0.0);
  if (rep.marginal_discrepancy > marginal_tolerance) return rep;
  rep.matched_marginals = true;
  const Grid1D& other = fixed == Axis::kX ? g.v : g.x;
  parallel_for(a.size(), threads, [&](std::size_t k) {
    if (a.mass(k) <= kFiberFloor || b.mass(k) <= kFiberFloor) return;
    const auto pv = fiber_values(mu, fixed, k);
    const auto qv = fiber_values(nu, fixed, k);
    rep.per_fiber_cost_sq[k] = w2_sq_1d(other, pv, qv, rec);
    rep.fiber_weights[k] = a.mass(k);
  });
  double total = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) total += rep.fiber_weights[k] * rep.per_fiber_cost_sq[k];
  rep.value = std::sqrt(total);
  return rep;
}

}  // namespace detail

/// W2 with the x-marginal fixed: fibers are the v-conditionals.
inline FiberedDistanceReport w2v(const PhaseDensity& mu, const PhaseDensity& nu,
                                 double marginal_tolerance = kDefaultMassTolerance,
                                 Reconstruction rec = Reconstruction::kPiecewiseConstant,
                                 int threads = 1) {
  return detail::fibered_distance(mu, nu, Axis::kX, marginal_tolerance, rec, threads);
}

/// W2 with the v-marginal fixed: fibers are the x-conditionals.
inline FiberedDistanceReport w2x(const PhaseDensity& mu, const PhaseDensity& nu,
                                 double marginal_tolerance = kDefaultMassTolerance,
                                 Reconstruction rec = Reconstruction::kPiecewiseConstant,
                                 int threads = 1) {
  return detail::fibered_distance(mu, nu, Axis::kV, marginal_tolerance, rec, threads);
}

namespace detail {

// Masses of the displacement interpolation of two fibers at time t,
// rasterized onto the grid.
inline std::vector<double> interpolate_fiber(const Grid1D& grid, std::span<const double> p,
                                             std::span<const double> q, double t,
                                             Reconstruction rec) {
  const auto pp = quantile_pieces(grid, p, rec);
  const auto qq = quantile_pieces(grid, q, rec);
  const std::size_t n = grid.size();
  std::vector<double> out(n, 0.0);
  const double lo = grid.lower(), dv = grid.spacing();
  merge_quantiles(pp, qq, [&](double s0, double s1, double p0, double p1, double q0, double q1) {
    const double mass = s1 - s0;
    const double y0 = (1.0 - t) * p0 + t * q0;
    const double y1 = (1.0 - t) * p1 + t * q1;
    if (rec == Reconstruction::kAtomic || y1 <= y0) {
      // Point mass: split linearly between the two nearest centers.
      const double pos = std::clamp((y0 - lo) / dv - 0.5, 0.0, static_cast<double>(n - 1));
      const auto k = static_cast<std::size_t>(pos);
      const double frac = pos - static_cast<double>(k);
      out[k] += mass * (1.0 - frac);
      if (frac > 0.0 && k + 1 < n) out[k + 1] += mass * frac;
      return;
    }
    // Uniform mass on [y0, y1]: deposit the overlap with each cell.
    const double density = mass / (y1 - y0);
    auto first = static_cast<std::ptrdiff_t>(std::floor((y0 - lo) / dv));
    auto last = static_cast<std::ptrdiff_t>(std::floor((y1 - lo) / dv));
    first = std::clamp<std::ptrdiff_t>(first, 0, static_cast<std::ptrdiff_t>(n) - 1);
    last = std::clamp<std::ptrdiff_t>(last, 0, static_cast<std::ptrdiff_t>(n) - 1);
    double deposited = 0.0;
    for (std::ptrdiff_t k = first; k <= last; ++k) {
      const double a = std::max(y0, grid.edge(static_cast<std::size_t>(k)));
      const double b = std::min(y1, grid.edge(static_cast<std::size_t>(k) + 1));
      if (b > a) {
        const double dm = (k == last) ? mass - deposited : density * (b - a);
        out[static_cast<std::size_t>(k)] += dm;
        deposited += dm;
      }
    }
    if (deposited < mass) out[static_cast<std::size_t>(last)] += mass - deposited;
  });
  return out;
}

}  // namespace detail

/// Fiberwise displacement interpolation between mu (t = 0) and nu (t = 1)
/// sharing the x-marginal.
inline PhaseDensity w2v_geodesic(const PhaseDensity& mu, const PhaseDensity& nu, double t,
                                 double marginal_tolerance = kDefaultMassTolerance,
                                 Reconstruction rec = Reconstruction::kPiecewiseConstant) {
  require(mu.grid() == nu.grid(), ErrorCode::kInvalidArgument, "densities live on different grids");
  require(t >= 0.0 && t <= 1.0, ErrorCode::kInvalidArgument, "geodesic time must be in [0, 1]");
  const auto& g = mu.grid();
  const Marginal1D a = marginal(mu, Axis::kX);
  const Marginal1D b = marginal(nu, Axis::kX);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += std::abs(a[i] - b[i]);
  require(diff * g.x.spacing() <= marginal_tolerance, ErrorCode::kMarginalMismatch,
          "x-marginals differ by " + std::to_string(diff * g.x.spacing()));
  if (t == 0.0) return mu;
  std::vector<double> rho(g.size(), 0.0);
  const double dv = g.v.spacing();
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    if (a.mass(i) <= kFiberFloor || b.mass(i) <= kFiberFloor) continue;
    const auto pv = fiber_values(mu, Axis::kX, i);
    const auto qv = fiber_values(nu, Axis::kX, i);
    const auto m = detail::interpolate_fiber(g.v, pv, qv, t, rec);
    for (std::size_t j = 0; j < g.v.size(); ++j) rho[g.index(i, j)] = a[i] * m[j] / dv;
  }
  return PhaseDensity::normalized(g, std::move(rho));
}

}  // namespace vfp
