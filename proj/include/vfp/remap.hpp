#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace vfp {

namespace detail {

inline double minmod(double a, double b) {
  if (a * b <= 0.0) return 0.0;
  return std::abs(a) < std::abs(b) ? a : b;
}

}  // namespace detail

/// Conservative shift of a cell-averaged profile by `shift` cells using a
/// minmod-limited piecewise-linear reconstruction with zero ghost cells. The
/// result is nonnegative whenever the input is; mass leaving the window is
/// dropped. Integer shifts copy exactly.
inline std::vector<double> shift_profile(std::span<const double> f, double shift) {
  const auto n = static_cast<std::ptrdiff_t>(f.size());
  std::vector<double> out(f.size(), 0.0);
  const double fl = std::floor(shift);
  const auto whole = static_cast<std::ptrdiff_t>(fl);
  const double theta = shift - fl;
  if (theta == 0.0) {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const std::ptrdiff_t k = i + whole;
      if (k >= 0 && k < n) out[static_cast<std::size_t>(k)] = f[static_cast<std::size_t>(i)];
    }
    return out;
  }
  auto at = [&](std::ptrdiff_t i) { return (i < 0 || i >= n) ? 0.0 : f[static_cast<std::size_t>(i)]; };
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double fi = f[static_cast<std::size_t>(i)];
    if (fi == 0.0) continue;
    const double slope = detail::minmod(fi - at(i - 1), at(i + 1) - fi);
    // Right part [1 - theta, 1] of source cell i lands in cell i + whole + 1,
    // the left part [0, 1 - theta] in cell i + whole.
    const double right = theta * (fi + slope * 0.5 * (1.0 - theta));
    const double left = fi - right;
    const std::ptrdiff_t k = i + whole;
    if (k >= 0 && k < n) out[static_cast<std::size_t>(k)] += left;
    if (k + 1 >= 0 && k + 1 < n) out[static_cast<std::size_t>(k + 1)] += right;
  }
  for (double& v : out) v = std::max(v, 0.0);
  return out;
}

}  // namespace vfp
