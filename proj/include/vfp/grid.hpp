#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "vfp/error.hpp"

namespace vfp {

enum class Axis { kX, kV };

/// Uniform cell-centered grid on [lower, upper].
class Grid1D {
 public:
  Grid1D(double lower, double upper, std::size_t n_cells)
      : lower_(lower), upper_(upper), n_cells_(n_cells) {
    require(std::isfinite(lower) && std::isfinite(upper) && upper > lower,
            ErrorCode::kInvalidArgument, "grid bounds must be finite with upper > lower");
    require(n_cells >= 4, ErrorCode::kInvalidArgument,
            "grid needs at least 4 cells, got " + std::to_string(n_cells));
    spacing_ = (upper - lower) / static_cast<double>(n_cells);
  }

  double lower() const { return lower_; }
  double upper() const { return upper_; }
  std::size_t n_cells() const { return n_cells_; }
  std::size_t size() const { return n_cells_; }
  double spacing() const { return spacing_; }

  double center(std::size_t k) const {
    return lower_ + (static_cast<double>(k) + 0.5) * spacing_;
  }
  /// Edge k sits between cells k-1 and k; edges run 0..n_cells.
  double edge(std::size_t k) const { return lower_ + static_cast<double>(k) * spacing_; }

  bool operator==(const Grid1D& other) const {
    return lower_ == other.lower_ && upper_ == other.upper_ && n_cells_ == other.n_cells_;
  }

 private:
  double lower_;
  double upper_;
  std::size_t n_cells_;
  double spacing_;
};

/// Tensor grid over (x, v); storage everywhere is row-major with x outer.
struct PhaseGrid {
  Grid1D x;
  Grid1D v;

  double cell_area() const { return x.spacing() * v.spacing(); }
  std::size_t size() const { return x.size() * v.size(); }
  std::size_t index(std::size_t i, std::size_t j) const { return i * v.size() + j; }
  const Grid1D& axis(Axis a) const { return a == Axis::kX ? x : v; }

  bool operator==(const PhaseGrid& other) const = default;
};

/// Symmetric box [-half_x, half_x] x [-half_v, half_v].
inline PhaseGrid symmetric_grid(double half_x, std::size_t nx, double half_v, std::size_t nv) {
  return PhaseGrid{Grid1D(-half_x, half_x, nx), Grid1D(-half_v, half_v, nv)};
}

}  // namespace vfp
