#include "varpro/metrics.hpp"

#include <cmath>
#include <iostream>
#include <numbers>
#include <stdexcept>

namespace varpro {

namespace {

constexpr double kMassTol = 1e-12;
constexpr double kNegativeWarn = -1e-12;

void check_comparable(const WeightedAtoms& a, const WeightedAtoms& b) {
  a.validate();
  b.validate();
  if (!(a.domain == b.domain)) throw InvalidInput("measures live on different domains");
  if (std::abs(a.total() - b.total()) > kMassTol) throw InvalidInput("measures have unequal total mass");
}

// Circle atoms embedded as unit vectors so the chordal distance is a plain hypot.
struct Embedded {
  std::vector<double> c, s;
};

Embedded embed(const WeightedAtoms& a) {
  Embedded e;
  e.c.reserve(a.locations.size());
  e.s.reserve(a.locations.size());
  for (const auto& p : a.locations) {
    e.c.push_back(std::cos(p[0]));
    e.s.push_back(std::sin(p[0]));
  }
  return e;
}

double clamp_mmd(double sq) {
  if (sq < kNegativeWarn) std::clog << "warning: negative MMD^2 " << sq << " clamped to zero\n";
  return std::sqrt(std::max(0.0, sq));
}

}  // namespace

WeightedAtoms WeightedAtoms::uniform(const ParticleEnsemble& e) {
  if (e.atoms.empty()) throw InvalidInput("ensemble is empty");
  return WeightedAtoms{e.domain, e.atoms, Eigen::VectorXd::Constant(e.size(), 1.0 / static_cast<double>(e.size()))};
}

void WeightedAtoms::validate() const {
  if (locations.empty()) throw InvalidInput("weighted atoms are empty");
  if (weights.size() != size()) throw InvalidInput("weight count does not match atom count");
  if ((weights.array() < 0.0).any() || !weights.allFinite()) throw InvalidInput("weights must be finite and >= 0");
  if (std::abs(weights.sum() - 1.0) > kMassTol) throw InvalidInput("weights must sum to one");
  for (const auto& p : locations) {
    if (p.dim() != domain.dim) throw InvalidInput("atom dimension does not match the domain");
  }
}

std::string_view to_string(EnergyDistance d) {
  return d == EnergyDistance::Chordal ? "chordal" : "quotient";
}

EnergyDistance energy_distance_from_string(std::string_view name) {
  if (name == "chordal") return EnergyDistance::Chordal;
  if (name == "quotient" || name == "geodesic") return EnergyDistance::Quotient;
  throw InvalidInput("unknown energy distance: " + std::string(name));
}

EnergyDistance default_energy_distance(const Domain& d) {
  return d.kind == DomainKind::Circle ? EnergyDistance::Chordal : EnergyDistance::Quotient;
}

double energy_cross_term(const WeightedAtoms& a, const WeightedAtoms& b, EnergyDistance dist) {
  if (!(a.domain == b.domain)) throw InvalidInput("measures live on different domains");
  double total = 0.0;
  if (dist == EnergyDistance::Chordal && a.domain.kind == DomainKind::Circle) {
    const Embedded ea = embed(a);
    const Embedded eb = embed(b);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      double row = 0.0;
      for (Eigen::Index k = 0; k < b.size(); ++k) {
        row += b.weights[k] * std::hypot(ea.c[i] - eb.c[k], ea.s[i] - eb.s[k]);
      }
      total += a.weights[i] * row;
    }
    return total;
  }
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    double row = 0.0;
    for (Eigen::Index k = 0; k < b.size(); ++k) {
      const double d = dist == EnergyDistance::Chordal ? chordal_distance(a.locations[i], b.locations[k], a.domain)
                                                       : quotient_distance(a.locations[i], b.locations[k], a.domain);
      row += b.weights[k] * d;
    }
    total += a.weights[i] * row;
  }
  return total;
}

double mmd_energy(const WeightedAtoms& a, const WeightedAtoms& b, EnergyDistance dist) {
  check_comparable(a, b);
  // Kernel -dist: MMD^2 = -AA - BB + 2 AB in terms of distance sums.
  const double sq = 2.0 * energy_cross_term(a, b, dist) - energy_cross_term(a, a, dist) -
                    energy_cross_term(b, b, dist);
  return clamp_mmd(sq);
}

EnergyMmdReference::EnergyMmdReference(WeightedAtoms reference, EnergyDistance dist)
    : ref_(std::move(reference)), dist_(dist) {
  ref_.validate();
  self_ = energy_cross_term(ref_, ref_, dist_);
}

double EnergyMmdReference::operator()(const WeightedAtoms& other) const {
  check_comparable(ref_, other);
  const double sq = 2.0 * energy_cross_term(other, ref_, dist_) - self_ - energy_cross_term(other, other, dist_);
  return clamp_mmd(sq);
}

FeatureMmdRoutes mmd_feature_routes(const WeightedAtoms& a, const WeightedAtoms& b, const FeatureModel& model,
                                    const DataSet& data) {
  check_comparable(a, b);
  const double n = static_cast<double>(data.size());
  const ParticleEnsemble ea{a.domain, a.locations, std::nullopt, 0};
  const ParticleEnsemble eb{b.domain, b.locations, std::nullopt, 0};
  const FeatureMatrix pa = assemble_matrix(model, ea, data);
  const FeatureMatrix pb = assemble_matrix(model, eb, data);

  // Route 1: kernel double sum with kappa(w, w') = (1/N) sum_j phi(w, x_j) phi(w', x_j).
  const Eigen::MatrixXd kaa = pa.transpose() * pa / n;
  const Eigen::MatrixXd kbb = pb.transpose() * pb / n;
  const Eigen::MatrixXd kab = pa.transpose() * pb / n;
  const double sq = a.weights.dot(kaa * a.weights) + b.weights.dot(kbb * b.weights) -
                    2.0 * a.weights.dot(kab * b.weights);

  // Route 2: the L2 norm of the pushed-forward difference.
  const Eigen::VectorXd diff = pa * a.weights - pb * b.weights;
  FeatureMmdRoutes out;
  out.double_sum = std::sqrt(std::max(0.0, sq));
  out.operator_norm = std::sqrt(diff.squaredNorm() / n);
  return out;
}

double mmd_feature(const WeightedAtoms& a, const WeightedAtoms& b, const FeatureModel& model,
                   const DataSet& data) {
  const FeatureMmdRoutes r = mmd_feature_routes(a, b, model, data);
  const double sq_ds = r.double_sum * r.double_sum;
  const double sq_op = r.operator_norm * r.operator_norm;
  const double scale = model.kind == FeatureKind::LaplaceTorus ? model.amplitude * model.amplitude : 1.0;
  if (std::abs(sq_ds - sq_op) > 1e-10 * scale * (1.0 + sq_op)) {
    throw std::logic_error("feature MMD routes disagree");
  }
  return r.operator_norm;
}

DensityField kde_density(const WeightedAtoms& a, double sigma, const Grid1D& grid) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidInput("kde bandwidth must be positive");
  if (a.domain.kind != DomainKind::Circle) throw InvalidInput("kde_density is defined on the circle");
  grid.validate();
  a.validate();

  const double two_pi = 2.0 * std::numbers::pi;
  const double h = grid.h();
  const double reach = 5.0 * sigma;
  const double norm = 1.0 / (sigma * std::sqrt(two_pi));
  const int replicas = static_cast<int>(std::ceil(reach / two_pi)) + 1;

  DensityField out{grid, Eigen::VectorXd::Zero(grid.n_cells)};
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double w = a.weights[i] * norm;
    for (int k = -replicas; k <= replicas; ++k) {
      const double p = a.locations[i][0] + k * two_pi;
      const long lo = std::max(0L, static_cast<long>(std::ceil((p - reach) / h - 0.5)));
      const long hi = std::min<long>(grid.n_cells - 1, static_cast<long>(std::floor((p + reach) / h - 0.5)));
      for (long j = lo; j <= hi; ++j) {
        const double d = grid.center(static_cast<int>(j)) - p;
        if (std::abs(d) <= reach) out.values[j] += w * std::exp(-0.5 * d * d / (sigma * sigma));
      }
    }
  }
  out.normalize();
  return out;
}

double l2_density_distance(const DensityField& a, const DensityField& b) {
  if (!(a.grid == b.grid)) throw InvalidInput("density fields live on different grids");
  if (a.values.size() != b.values.size()) throw InvalidInput("density field sizes differ");
  return std::sqrt(a.grid.h() * (a.values - b.values).squaredNorm());
}

WeightedAtoms grid_as_atoms(const DensityField& f) {
  f.grid.validate();
  if (f.values.size() != f.grid.n_cells) throw InvalidInput("density field size does not match its grid");
  if ((f.values.array() < 0.0).any() || !(f.values.sum() > 0.0)) {
    throw InvalidInput("grid_as_atoms needs a nonnegative field with positive mass");
  }
  const Domain d = Domain::circle();
  WeightedAtoms out;
  out.domain = d;
  out.locations.reserve(static_cast<std::size_t>(f.grid.n_cells));
  for (int j = 0; j < f.grid.n_cells; ++j) out.locations.push_back(canonicalize({f.grid.center(j)}, d));
  out.weights = f.values / f.values.sum();
  return out;
}

}  // namespace varpro
