#pragma once

#include <cstddef>
#include <vector>

namespace vfp {

/// Solves a tridiagonal system in place by Thomas elimination. `lower[0]` and
/// `upper[n-1]` are ignored. No pivoting: callers pass diagonally dominant
/// matrices.
inline void solve_tridiagonal(const std::vector<double>& lower, const std::vector<double>& diag,
                              const std::vector<double>& upper, std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  if (n == 0) return;
  std::vector<double> c(n);
  double beta = diag[0];
  rhs[0] /= beta;
  for (std::size_t k = 1; k < n; ++k) {
    c[k] = upper[k - 1] / beta;
    beta = diag[k] - lower[k] * c[k];
    rhs[k] = (rhs[k] - lower[k] * rhs[k - 1]) / beta;
  }
  for (std::size_t k = n - 1; k-- > 0;) rhs[k] -= c[k + 1] * rhs[k + 1];
}

}  // namespace vfp
