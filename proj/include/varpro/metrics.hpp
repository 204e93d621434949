#pragma once

#include "varpro/density.hpp"
#include "varpro/features.hpp"
#include "varpro/types.hpp"

#include <string_view>
#include <vector>

namespace varpro {

/// Probability measure sum_i w_i delta_{x_i} on a Domain.
struct WeightedAtoms {
  Domain domain;
  std::vector<ManifoldPoint> locations;
  Eigen::VectorXd weights;

  /// Uniform weights 1/M on the ensemble atoms.
  static WeightedAtoms uniform(const ParticleEnsemble& e);

  Eigen::Index size() const { return static_cast<Eigen::Index>(locations.size()); }
  double total() const { return weights.sum(); }
  void validate() const;
};

enum class EnergyDistance { Chordal, Quotient };

std::string_view to_string(EnergyDistance d);
EnergyDistance energy_distance_from_string(std::string_view name);

/// The default energy distance for a domain: chordal on the circle, quotient on the torus.
EnergyDistance default_energy_distance(const Domain& d);

/// sum_{a,b} w_a v_b dist(a, b)
double energy_cross_term(const WeightedAtoms& a, const WeightedAtoms& b, EnergyDistance dist);

/// MMD for the energy-distance kernel -dist. Negative round-off in MMD^2 is clamped
/// to zero; values below -1e-12 also print a warning.
double mmd_energy(const WeightedAtoms& a, const WeightedAtoms& b, EnergyDistance dist);

/// Energy MMD against a fixed reference measure whose self-term is computed once.
class EnergyMmdReference {
 public:
  EnergyMmdReference(WeightedAtoms reference, EnergyDistance dist);

  double operator()(const WeightedAtoms& other) const;
  const WeightedAtoms& reference() const { return ref_; }
  EnergyDistance distance() const { return dist_; }

 private:
  WeightedAtoms ref_;
  EnergyDistance dist_;
  double self_ = 0.0;
};

/// The feature-kernel MMD computed two independent ways.
struct FeatureMmdRoutes {
  double double_sum = 0.0;     ///< sqrt of sum w w' kappa(a, a') + ... - 2 sum w v kappa(a, b)
  double operator_norm = 0.0;  ///< |Phi * (A - B)| in L2 of the empirical data measure
};

FeatureMmdRoutes mmd_feature_routes(const WeightedAtoms& a, const WeightedAtoms& b, const FeatureModel& model,
                                    const DataSet& data);

/// Operator-norm value; throws std::logic_error if the two routes disagree by more
/// than 1e-10 in MMD^2 relative to the kernel scale.
double mmd_feature(const WeightedAtoms& a, const WeightedAtoms& b, const FeatureModel& model,
                   const DataSet& data);

inline constexpr double kDefaultKdeBandwidth = 0.03;

/// Wrapped-Gaussian KDE at cell centers, replicas within +-5 sigma, renormalized to unit mass.
DensityField kde_density(const WeightedAtoms& a, double sigma, const Grid1D& grid);

/// sqrt(h sum_j (a_j - b_j)^2)
double l2_density_distance(const DensityField& a, const DensityField& b);

/// Atoms at cell centers with weights h f_j / mass.
WeightedAtoms grid_as_atoms(const DensityField& f);

}  // namespace varpro
