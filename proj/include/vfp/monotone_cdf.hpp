#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace vfp {

/// C1 monotone cubic interpolant of a cumulative distribution given by cell
/// masses on a uniform grid. Edge derivatives are harmonic means of the
/// neighboring cell densities, which keeps every cell piece monotone. The
/// survival function is tracked separately so upper-tail values keep full
/// relative precision.
class MonotoneCdf {
 public:
  struct Value {
    double value;
    double density;
  };

  MonotoneCdf(std::span<const double> masses, double lower, double spacing)
      : m_(masses.begin(), masses.end()), lower_(lower), dv_(spacing), n_(masses.size()) {
    left_.assign(n_ + 1, 0.0);
    right_.assign(n_ + 1, 0.0);
    for (std::size_t j = 0; j < n_; ++j) left_[j + 1] = left_[j] + m_[j];
    for (std::size_t j = n_; j-- > 0;) right_[j] = right_[j + 1] + m_[j];
    slope_.assign(n_ + 1, 0.0);
    slope_[0] = m_[0] / dv_;
    slope_[n_] = m_[n_ - 1] / dv_;
    for (std::size_t k = 1; k < n_; ++k) {
      const double a = m_[k - 1] / dv_, b = m_[k] / dv_;
      slope_[k] = (a > 0.0 && b > 0.0) ? 2.0 * a * b / (a + b) : 0.0;
    }
  }

  std::size_t size() const { return n_; }
  double lower() const { return lower_; }
  double spacing() const { return dv_; }
  double edge(std::size_t k) const { return lower_ + static_cast<double>(k) * dv_; }
  /// Cumulative mass left of edge k, summed from the left.
  double left(std::size_t k) const { return left_[k]; }
  /// Mass right of edge k, summed from the right.
  double right(std::size_t k) const { return right_[k]; }
  double mass(std::size_t j) const { return m_[j]; }

  /// Mass of cell j lying left of lower + (j + t) * spacing.
  double partial(std::size_t j, double t) const {
    const double t2 = t * t, t3 = t2 * t;
    const double h01 = 3.0 * t2 - 2.0 * t3;
    const double h10 = t3 - 2.0 * t2 + t;
    const double h11 = t3 - t2;
    return h01 * m_[j] + dv_ * (h10 * slope_[j] + h11 * slope_[j + 1]);
  }

  double density(std::size_t j, double t) const {
    const double t2 = t * t;
    return (6.0 * t - 6.0 * t2) * m_[j] / dv_ + (3.0 * t2 - 4.0 * t + 1.0) * slope_[j] +
           (3.0 * t2 - 2.0 * t) * slope_[j + 1];
  }

  Value cdf(double v) const {
    std::size_t j;
    double t;
    const int where = locate(v, j, t);
    if (where < 0) return {0.0, 0.0};
    if (where > 0) return {left_[n_], 0.0};
    return {left_[j] + partial(j, t), density(j, t)};
  }

  Value survival(double v) const {
    std::size_t j;
    double t;
    const int where = locate(v, j, t);
    if (where < 0) return {right_[0], 0.0};
    if (where > 0) return {0.0, 0.0};
    return {right_[j + 1] + (m_[j] - partial(j, t)), density(j, t)};
  }

  /// Smallest v with cdf(v) >= p.
  double quantile(double p) const {
    if (p <= 0.0) return first_support_edge();
    if (p >= left_[n_]) return last_support_edge();
    auto it = std::upper_bound(left_.begin(), left_.end(), p);
    std::size_t j = static_cast<std::size_t>(it - left_.begin()) - 1;
    j = std::min(j, n_ - 1);
    while (j + 1 < n_ && m_[j] <= 0.0) ++j;
    return edge(j) + dv_ * solve_partial(j, p - left_[j]);
  }

  /// Point v with survival(v) = q, resolved from the right tail.
  double survival_quantile(double q) const {
    if (q <= 0.0) return last_support_edge();
    if (q >= right_[0]) return first_support_edge();
    // right_ is nonincreasing; find j with right_[j+1] <= q < right_[j].
    std::size_t lo = 0, hi = n_;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if (right_[mid] > q) lo = mid; else hi = mid;
    }
    std::size_t j = lo;
    while (j > 0 && m_[j] <= 0.0) --j;
    const double target = m_[j] - (q - right_[j + 1]);
    return edge(j) + dv_ * solve_partial(j, std::clamp(target, 0.0, m_[j]));
  }

 private:
  int locate(double v, std::size_t& j, double& t) const {
    const double s = (v - lower_) / dv_;
    if (!(s >= 0.0)) return -1;
    if (s >= static_cast<double>(n_)) return 1;
    j = static_cast<std::size_t>(s);
    if (j >= n_) j = n_ - 1;
    t = s - static_cast<double>(j);
    return 0;
  }

  double first_support_edge() const {
    for (std::size_t j = 0; j < n_; ++j)
      if (m_[j] > 0.0) return edge(j);
    return lower_;
  }
  double last_support_edge() const {
    for (std::size_t j = n_; j-- > 0;)
      if (m_[j] > 0.0) return edge(j + 1);
    return edge(n_);
  }

  // Safeguarded Newton for partial(j, t) = target on [0, 1].
  double solve_partial(std::size_t j, double target) const {
    if (m_[j] <= 0.0) return 0.0;
    double lo = 0.0, hi = 1.0;
    double t = std::clamp(target / m_[j], 0.0, 1.0);
    for (int it = 0; it < 100; ++it) {
      const double f = partial(j, t) - target;
      if (f == 0.0) return t;
      if (f < 0.0) lo = t; else hi = t;
      const double d = density(j, t) * dv_;
      double next = d > 0.0 ? t - f / d : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - t) <= 1e-16) return next;
      t = next;
      if (hi - lo <= 1e-16) break;
    }
    return t;
  }

  std::vector<double> m_;
  double lower_;
  double dv_;
  std::size_t n_;
  std::vector<double> left_;
  std::vector<double> right_;
  std::vector<double> slope_;
};

}  // namespace vfp
