#include "varpro/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace varpro {

namespace {

double unnormalized_profile(double z, double gamma, double period) {
  const double s = std::sin(std::numbers::pi * z / period);
  return 1.0 / (1.0 + gamma * s * s);
}

}  // namespace

PiGammaProfile::PiGammaProfile(double gamma, double period) : gamma_(gamma), period_(period) {
  if (!std::isfinite(gamma) || gamma < 0.0) throw InvalidInput("pi_gamma needs a finite gamma >= 0");
  if (!(period > 0.0)) throw InvalidInput("pi_gamma needs a positive period");

  const int k = kInverseCdfNodes;
  const double dz = period / k;
  nodes_.resize(k + 1);
  cdf_.resize(k + 1);
  std::vector<double> q(k + 1);
  for (int i = 0; i <= k; ++i) {
    nodes_[i] = -0.5 * period + i * dz;
    q[i] = unnormalized_profile(nodes_[i], gamma, period);
  }
  cdf_[0] = 0.0;
  for (int i = 0; i < k; ++i) cdf_[i + 1] = cdf_[i] + 0.5 * dz * (q[i] + q[i + 1]);
  norm_ = cdf_[k];
  for (double& c : cdf_) c /= norm_;
  cdf_[k] = 1.0;
}

double PiGammaProfile::density(double z) const {
  return unnormalized_profile(z, gamma_, period_) / norm_;
}

double PiGammaProfile::cdf(double z) const {
  const double w = wrap_centered(z, period_);
  const double pos = (w + 0.5 * period_) / period_ * kInverseCdfNodes;
  const int i = std::clamp(static_cast<int>(pos), 0, kInverseCdfNodes - 1);
  const double frac = pos - i;
  return cdf_[i] + frac * (cdf_[i + 1] - cdf_[i]);
}

double PiGammaProfile::sample(Rng& rng) const {
  const double u = rng.uniform();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto i = std::clamp<std::ptrdiff_t>(it - cdf_.begin() - 1, 0, kInverseCdfNodes - 1);
  const double c0 = cdf_[i];
  const double c1 = cdf_[i + 1];
  const double frac = c1 > c0 ? (u - c0) / (c1 - c0) : 0.0;
  return nodes_[i] + frac * (nodes_[i + 1] - nodes_[i]);
}

TeacherSpec TeacherSpec::circle_default(double gamma, int width) {
  const Domain d = Domain::circle();
  TeacherSpec s;
  s.domain = d;
  s.modes = {{canonicalize({0.0}, d), 2.0 / 3.0}, {canonicalize({0.4 * std::numbers::pi}, d), 1.0 / 3.0}};
  s.gamma = gamma;
  s.width = width;
  return s;
}

TeacherSpec TeacherSpec::torus_default(double gamma, int width) {
  const Domain d = Domain::flat_torus(2, 4.0);
  TeacherSpec s;
  s.domain = d;
  s.modes = {{canonicalize({-1.0, 0.0}, d), 0.5}, {canonicalize({1.0, 1.0}, d), 0.5}};
  s.gamma = gamma;
  s.width = width;
  return s;
}

bool TeacherSpec::atomic() const { return std::isinf(gamma); }

void TeacherSpec::validate() const {
  domain.validate();
  if (modes.empty()) throw InvalidInput("teacher needs at least one mode");
  double total = 0.0;
  for (const auto& m : modes) {
    if (m.location.dim() != domain.dim) throw InvalidInput("teacher mode dimension mismatch");
    if (!(m.weight >= 0.0)) throw InvalidInput("teacher mode weights must be nonnegative");
    total += m.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidInput("teacher mode weights must sum to one");
  if (std::isnan(gamma) || gamma < 0.0) throw InvalidInput("teacher gamma must be >= 0");
  if (width < 1) throw InvalidInput("teacher width must be positive");
}

double pi_gamma_density(double theta, double gamma) {
  const PiGammaProfile profile(gamma, 2.0 * std::numbers::pi);
  return profile.density(theta);
}

TeacherDensity::TeacherDensity(const TeacherSpec& spec)
    : spec_(spec), profile_(spec.gamma, spec.domain.period) {
  spec_.validate();
}

double TeacherDensity::operator()(const ManifoldPoint& p) const {
  double acc = 0.0;
  for (const auto& mode : spec_.modes) {
    const Coords z = displacement(p, mode.location, spec_.domain);
    double prod = 1.0;
    for (int k = 0; k < spec_.domain.dim; ++k) prod *= profile_.density(z[k]);
    acc += mode.weight * prod;
  }
  return acc;
}

double mu_gamma_density(double theta, const TeacherSpec& spec) {
  if (spec.domain.kind != DomainKind::Circle) throw InvalidInput("mu_gamma_density expects a circle teacher");
  return TeacherDensity(spec)(canonicalize({theta}, spec.domain));
}

ParticleEnsemble sample_teacher(const TeacherSpec& spec, Rng& rng) {
  spec.validate();
  ParticleEnsemble out;
  out.domain = spec.domain;
  out.atoms.reserve(static_cast<std::size_t>(spec.width));

  std::optional<PiGammaProfile> profile;
  if (!spec.atomic()) profile.emplace(spec.gamma, spec.domain.period);

  for (int a = 0; a < spec.width; ++a) {
    const double u = rng.uniform();
    std::size_t m = 0;
    double cum = spec.modes[0].weight;
    while (u >= cum && m + 1 < spec.modes.size()) cum += spec.modes[++m].weight;

    Coords c = spec.modes[m].location.coords();
    if (profile) {
      for (int k = 0; k < spec.domain.dim; ++k) c[k] += profile->sample(rng);
    }
    out.atoms.push_back(canonicalize(c, spec.domain));
  }
  return out;
}

Eigen::VectorXd teacher_signal(const FeatureModel& m, const ParticleEnsemble& teacher,
                               const RowMatrix& xs) {
  if (teacher.atoms.empty()) throw InvalidInput("teacher ensemble is empty");
  DataSet probe{xs, Eigen::VectorXd(), 0};
  const FeatureMatrix phi = assemble_matrix(m, teacher, probe);
  Eigen::VectorXd ys(xs.rows());
  const double inv = 1.0 / static_cast<double>(teacher.size());
  for (Eigen::Index j = 0; j < phi.rows(); ++j) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < phi.cols(); ++i) acc += phi(j, i);
    ys[j] = acc * inv;
  }
  return ys;
}

DataSet make_dataset(const FeatureModel& m, const ParticleEnsemble& teacher, int n_samples, Rng& rng) {
  if (n_samples < 1) throw InvalidInput("dataset needs at least one sample");
  m.validate();
  DataSet data;
  data.seed = rng.key();
  data.xs.resize(n_samples, m.data_dim);
  for (int j = 0; j < n_samples; ++j) {
    for (int k = 0; k < m.data_dim; ++k) data.xs(j, k) = rng.normal();
  }
  data.ys = teacher_signal(m, teacher, data.xs);
  return data;
}

DensityField grid_teacher_density(const TeacherSpec& spec, const Grid1D& grid) {
  if (spec.atomic()) throw InvalidInput("an atomic teacher has no density");
  if (spec.domain.kind != DomainKind::Circle) throw InvalidInput("grid densities are only defined on the circle");
  grid.validate();
  const TeacherDensity density(spec);
  DensityField field{grid, Eigen::VectorXd(grid.n_cells)};
  for (int j = 0; j < grid.n_cells; ++j) field.values[j] = density(canonicalize({grid.center(j)}, spec.domain));
  field.normalize();
  return field;
}

}  // namespace varpro
