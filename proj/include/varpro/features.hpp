#pragma once

#include "varpro/geometry.hpp"
#include "varpro/types.hpp"

#include <span>
#include <string_view>

namespace varpro {

enum class FeatureKind { ReluSphere, LaplaceTorus };

std::string_view to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view name);

/// Gradient of the Laplace feature is set to zero when the displacement norm is
/// at or below this radius.
inline constexpr double kLaplaceSingularRadius = 1e-9;

/// Feature map phi(omega, x).
///
/// ReluSphere: omega is an angle on S^1, x in R^2, phi = max(0, cos(t) x1 + sin(t) x2).
/// LaplaceTorus: omega on R^n / L Z^n, x in R^n mapped into the torus,
/// phi = amplitude * exp(-decay * |[omega - x]|).
struct FeatureModel {
  FeatureKind kind = FeatureKind::ReluSphere;
  Domain domain = Domain::circle();
  int data_dim = 2;
  double amplitude = 8.0;
  double decay = 0.5;

  static FeatureModel relu_sphere();
  static FeatureModel laplace_torus(int dim = 2, double period = 4.0, double amplitude = 8.0,
                                    double decay = 0.5);

  void validate() const;
};

double eval_feature(const FeatureModel& m, const ManifoldPoint& omega, std::span<const double> x);

/// Intrinsic gradient with respect to omega (angle derivative on the circle).
Coords grad_feature(const FeatureModel& m, const ManifoldPoint& omega, std::span<const double> x);

FeatureMatrix assemble_matrix(const FeatureModel& m, const ParticleEnsemble& ensemble,
                              const DataSet& data);

/// Row i holds sum_j w_j grad_feature(omega_i, x_j), summed in data order.
RowMatrix weighted_gradient_sums(const FeatureModel& m, const ParticleEnsemble& ensemble,
                                 const DataSet& data, const Eigen::VectorXd& w);

/// Empirical tangent kernel Phi Phi^T / (M N).
Eigen::MatrixXd tangent_kernel(const FeatureMatrix& phi);

/// kappa(omega, omega') = (1/N) sum_j phi(omega, x_j) phi(omega', x_j).
double feature_kernel(const FeatureModel& m, const DataSet& data, const ManifoldPoint& a,
                      const ManifoldPoint& b);

inline std::span<const double> row_span(const RowMatrix& xs, Eigen::Index j) {
  return {xs.data() + j * xs.cols(), static_cast<std::size_t>(xs.cols())};
}

}  // namespace varpro
