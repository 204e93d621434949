#pragma once

#include "varpro/geometry.hpp"

#include <Eigen/Core>

#include <numbers>

namespace varpro {

/// Uniform periodic grid on [0, 2pi); cell j is [j h, (j+1) h).
struct Grid1D {
  int n_cells = 512;

  double h() const { return 2.0 * std::numbers::pi / n_cells; }
  double center(int j) const { return (j + 0.5) * h(); }

  void validate() const;
  bool operator==(const Grid1D&) const = default;
};

/// Cell-averaged density on a Grid1D; mass is h * sum(values).
struct DensityField {
  Grid1D grid;
  Eigen::VectorXd values;

  static DensityField uniform(const Grid1D& grid);

  double mass() const { return grid.h() * values.sum(); }
  bool strictly_positive() const { return (values.array() > 0.0).all(); }

  /// Rescales values so that the mass is exactly one (up to round-off).
  void normalize();
};

}  // namespace varpro
