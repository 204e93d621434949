#include "varpro/density.hpp"

namespace varpro {

void Grid1D::validate() const {
  if (n_cells < 16) throw InvalidInput("grid needs at least 16 cells");
  if ((n_cells & (n_cells - 1)) != 0) throw InvalidInput("grid cell count must be a power of two");
}

DensityField DensityField::uniform(const Grid1D& grid) {
  grid.validate();
  return DensityField{grid, Eigen::VectorXd::Constant(grid.n_cells, 1.0 / (2.0 * std::numbers::pi))};
}

void DensityField::normalize() {
  const double m = mass();
  if (!(m > 0.0)) throw InvalidInput("cannot normalize a field with non-positive mass");
  values /= m;
}

}  // namespace varpro
