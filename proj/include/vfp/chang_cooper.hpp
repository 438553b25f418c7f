#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "vfp/grid.hpp"
#include "vfp/tridiagonal.hpp"

namespace vfp {

/// Zero-flux Chang-Cooper discretization of the fiber drift-diffusion
/// operator L rho = d/dv((F + alpha v) rho + alpha d/dv rho). The edge flux is
/// a_k rho_k + b_k rho_{k+1}; the weighting makes the discrete Gibbs profile
/// an exact null vector.
class ChangCooperOperator {
 public:
  ChangCooperOperator(const Grid1D& v, double force, double alpha)
      : n_(v.size()), dv_(v.spacing()), a_(v.size() - 1), b_(v.size() - 1) {
    const double diff = alpha / dv_;
    for (std::size_t k = 0; k + 1 < n_; ++k) {
      const double drift = force + alpha * v.edge(k + 1);
      const double w = drift * dv_ / alpha;
      const double delta = weight(w);
      a_[k] = drift * delta - diff;
      b_[k] = drift * (1.0 - delta) + diff;
    }
  }

  /// Chang-Cooper weight 1/w - 1/(e^w - 1).
  static double weight(double w) {
    if (std::abs(w) < 1e-5) return 0.5 - w / 12.0;
    return 1.0 / w - 1.0 / std::expm1(w);
  }

  std::size_t size() const { return n_; }

  std::vector<double> apply(std::span<const double> rho) const {
    std::vector<double> out(n_, 0.0);
    for (std::size_t k = 0; k + 1 < n_; ++k) {
      const double flux = a_[k] * rho[k] + b_[k] * rho[k + 1];
      out[k] += flux / dv_;
      out[k + 1] -= flux / dv_;
    }
    return out;
  }

  /// Solves (I - tau L) x = rhs in place.
  void solve_shifted(double tau, std::vector<double>& rhs) const {
    std::vector<double> lo(n_, 0.0), di(n_, 1.0), up(n_, 0.0);
    const double s = tau / dv_;
    for (std::size_t k = 0; k + 1 < n_; ++k) {
      // flux at edge k+1 leaves cell k+1 into cell k
      di[k] -= s * a_[k];
      up[k] -= s * b_[k];
      lo[k + 1] += s * a_[k];
      di[k + 1] += s * b_[k];
    }
    solve_tridiagonal(lo, di, up, rhs);
  }

 private:
  std::size_t n_;
  double dv_;
  std::vector<double> a_;
  std::vector<double> b_;
};

}  // namespace vfp
