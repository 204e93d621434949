#pragma once

#include "varpro/density.hpp"
#include "varpro/features.hpp"
#include "varpro/geometry.hpp"
#include "varpro/rng.hpp"
#include "varpro/types.hpp"

#include <vector>

namespace varpro {

/// Number of nodes of the tabulated inverse CDF used by the samplers.
inline constexpr int kInverseCdfNodes = 16384;

/// One-dimensional periodic profile pi_gamma(z) proportional to
/// 1 / (1 + gamma sin^2(pi z / L)) on [-L/2, L/2).
///
/// The normalization constant is obtained by periodic trapezoidal quadrature on
/// the inverse-CDF grid; the integrand is analytic and periodic so the rule
/// converges geometrically.
class PiGammaProfile {
 public:
  PiGammaProfile(double gamma, double period);

  double gamma() const { return gamma_; }
  double period() const { return period_; }
  double normalization() const { return norm_; }

  double density(double z) const;
  double cdf(double z) const;  ///< CDF of the offset on [-L/2, L/2)

  /// Offset in [-L/2, L/2) by linear interpolation of the tabulated inverse CDF.
  double sample(Rng& rng) const;

 private:
  double gamma_;
  double period_;
  double norm_ = 0.0;
  std::vector<double> nodes_;
  std::vector<double> cdf_;
};

struct TeacherMode {
  ManifoldPoint location;
  double weight = 0.0;
};

/// Teacher feature distribution mu_gamma = (sum_m w_m delta_{mode_m}) * pi_gamma,
/// sampled with `width` atoms. gamma = +infinity gives the atomic limit.
struct TeacherSpec {
  Domain domain = Domain::circle();
  std::vector<TeacherMode> modes;
  double gamma = 100.0;
  int width = 4096;

  /// Modes 0 and 0.4 pi on the circle with weights 2/3 and 1/3.
  static TeacherSpec circle_default(double gamma = 100.0, int width = 4096);
  /// Modes (-1, 0) and (1, 1) on R^2 / 4 Z^2 with weights 1/2 and 1/2.
  static TeacherSpec torus_default(double gamma = 100.0, int width = 4096);

  bool atomic() const;
  void validate() const;
};

/// Normalized pi_gamma on [0, 2pi). Throws for infinite or negative gamma.
double pi_gamma_density(double theta, double gamma);

/// Density of mu_gamma w.r.t. Lebesgue measure on the domain. Accepts a point on any
/// Domain; on the torus the per-axis profile uses the torus period.
class TeacherDensity {
 public:
  explicit TeacherDensity(const TeacherSpec& spec);

  double operator()(const ManifoldPoint& p) const;
  const TeacherSpec& spec() const { return spec_; }
  const PiGammaProfile& profile() const { return profile_; }

 private:
  TeacherSpec spec_;
  PiGammaProfile profile_;
};

double mu_gamma_density(double theta, const TeacherSpec& spec);

ParticleEnsemble sample_teacher(const TeacherSpec& spec, Rng& rng);

/// Y(x_j) = (1/Mbar) sum_i phi(teacher_i, x_j), summed in atom order.
Eigen::VectorXd teacher_signal(const FeatureModel& m, const ParticleEnsemble& teacher,
                               const RowMatrix& xs);

DataSet make_dataset(const FeatureModel& m, const ParticleEnsemble& teacher, int n_samples, Rng& rng);

/// Teacher density at cell centers of a circle grid, renormalized to unit mass.
DensityField grid_teacher_density(const TeacherSpec& spec, const Grid1D& grid);

}  // namespace varpro
