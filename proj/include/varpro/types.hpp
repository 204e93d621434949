#pragma once

#include "varpro/geometry.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

namespace varpro {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense N x M feature matrix, Phi(j, i) = phi(omega_i, x_j), row-major by data index.
using FeatureMatrix = RowMatrix;

/// Training inputs xs (N x d, one sample per row) with target values ys.
struct DataSet {
  RowMatrix xs;
  Eigen::VectorXd ys;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return xs.rows(); }
  int input_dim() const { return static_cast<int>(xs.cols()); }
};

/// Empirical feature distribution (1/M) sum_i delta_{omega_i}, with optional outer
/// weights for the algorithms that carry them explicitly.
struct ParticleEnsemble {
  Domain domain;
  std::vector<ManifoldPoint> atoms;
  std::optional<Eigen::VectorXd> outer;
  long iteration = 0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(atoms.size()); }
};

}  // namespace varpro
