#include "varpro/features.hpp"

#include <cmath>
#include <string>
#include <tuple>
#include <utility>

namespace varpro {

namespace {

void check_point(const FeatureModel& m, const ManifoldPoint& omega) {
  if (omega.dim() != m.domain.dim) throw InvalidInput("feature point dimension mismatch");
}

void check_input(const FeatureModel& m, std::span<const double> x) {
  if (static_cast<int>(x.size()) != m.data_dim) throw InvalidInput("input dimension mismatch");
  for (double v : x) {
    if (!std::isfinite(v)) throw InvalidInput("non-finite input");
  }
}

// Shortest representative of omega - [x] on the torus.
Coords torus_offset(const FeatureModel& m, const ManifoldPoint& omega, std::span<const double> x) {
  const double period = m.domain.period;
  const double half = 0.5 * period;
  Coords z(m.domain.dim);
  for (int k = 0; k < m.domain.dim; ++k) {
    double diff = omega[k] - wrap_positive(x[k], period);
    if (diff >= half) {
      diff -= period;
    } else if (diff < -half) {
      diff += period;
    }
    z[k] = diff;
  }
  return z;
}

}  // namespace

std::string_view to_string(FeatureKind kind) {
  return kind == FeatureKind::ReluSphere ? "relu_sphere" : "laplace_torus";
}

FeatureKind feature_kind_from_string(std::string_view name) {
  if (name == "relu_sphere" || name == "relu") return FeatureKind::ReluSphere;
  if (name == "laplace_torus" || name == "laplace") return FeatureKind::LaplaceTorus;
  throw InvalidInput("unknown feature kind: " + std::string(name));
}

FeatureModel FeatureModel::relu_sphere() { return FeatureModel{}; }

FeatureModel FeatureModel::laplace_torus(int dim, double period, double amplitude, double decay) {
  FeatureModel m{FeatureKind::LaplaceTorus, Domain::flat_torus(dim, period), dim, amplitude, decay};
  m.validate();
  return m;
}

void FeatureModel::validate() const {
  domain.validate();
  if (kind == FeatureKind::ReluSphere) {
    if (domain.kind != DomainKind::Circle || data_dim != 2) {
      throw InvalidInput("ReLU sphere features need the circle domain and 2-d inputs");
    }
  } else {
    if (domain.kind != DomainKind::FlatTorus || data_dim != domain.dim) {
      throw InvalidInput("Laplace features need a flat torus with matching input dimension");
    }
    if (!(amplitude > 0.0) || !(decay > 0.0)) throw InvalidInput("Laplace amplitude and decay must be positive");
  }
}

// Single out-of-line evaluation so every code path sees the same rounding of cos and sin.
[[gnu::noinline]] static std::pair<double, double> unit_direction(double angle) {
  return {std::cos(angle), std::sin(angle)};
}

double eval_feature(const FeatureModel& m, const ManifoldPoint& omega, std::span<const double> x) {
  check_point(m, omega);
  check_input(m, x);
  if (m.kind == FeatureKind::ReluSphere) {
    const auto [c, s] = unit_direction(omega[0]);
    const double pre = c * x[0] + s * x[1];
    return pre > 0.0 ? pre : 0.0;
  }
  return m.amplitude * std::exp(-m.decay * torus_offset(m, omega, x).norm());
}

Coords grad_feature(const FeatureModel& m, const ManifoldPoint& omega, std::span<const double> x) {
  check_point(m, omega);
  check_input(m, x);
  Coords g = Coords::Zero(m.domain.dim);
  if (m.kind == FeatureKind::ReluSphere) {
    const auto [c, s] = unit_direction(omega[0]);
    if (c * x[0] + s * x[1] > 0.0) g[0] = -s * x[0] + c * x[1];
    return g;
  }
  const Coords z = torus_offset(m, omega, x);
  const double r = z.norm();
  if (r <= kLaplaceSingularRadius) return g;
  g = (-m.amplitude * m.decay * std::exp(-m.decay * r) / r) * z;
  return g;
}

FeatureMatrix assemble_matrix(const FeatureModel& m, const ParticleEnsemble& ensemble,
                              const DataSet& data) {
  if (ensemble.atoms.empty()) throw InvalidInput("ensemble is empty");
  if (data.size() < 1) throw InvalidInput("dataset is empty");
  if (data.input_dim() != m.data_dim) throw InvalidInput("dataset input dimension mismatch");
  if (!(ensemble.domain == m.domain)) throw InvalidInput("ensemble domain does not match the feature model");

  const Eigen::Index n = data.size();
  const Eigen::Index mm = ensemble.size();
  FeatureMatrix phi(n, mm);

  if (m.kind == FeatureKind::ReluSphere) {
    Eigen::VectorXd cs(mm), sn(mm);
    for (Eigen::Index i = 0; i < mm; ++i) {
      std::tie(cs[i], sn[i]) = unit_direction(ensemble.atoms[i][0]);
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const double x0 = data.xs(j, 0);
      const double x1 = data.xs(j, 1);
      for (Eigen::Index i = 0; i < mm; ++i) {
        const double pre = cs[i] * x0 + sn[i] * x1;
        phi(j, i) = pre > 0.0 ? pre : 0.0;
      }
    }
    return phi;
  }

  for (Eigen::Index j = 0; j < n; ++j) {
    const auto x = row_span(data.xs, j);
    for (Eigen::Index i = 0; i < mm; ++i) phi(j, i) = eval_feature(m, ensemble.atoms[i], x);
  }
  return phi;
}

RowMatrix weighted_gradient_sums(const FeatureModel& m, const ParticleEnsemble& ensemble,
                                 const DataSet& data, const Eigen::VectorXd& w) {
  if (ensemble.atoms.empty()) throw InvalidInput("ensemble is empty");
  if (data.input_dim() != m.data_dim) throw InvalidInput("dataset input dimension mismatch");
  if (!(ensemble.domain == m.domain)) throw InvalidInput("ensemble domain does not match the feature model");
  if (w.size() != data.size()) throw InvalidInput("weight length does not match the dataset");

  const Eigen::Index n = data.size();
  const Eigen::Index mm = ensemble.size();
  RowMatrix g = RowMatrix::Zero(mm, m.domain.dim);

  if (m.kind == FeatureKind::ReluSphere) {
    for (Eigen::Index i = 0; i < mm; ++i) {
      const auto [c, s] = unit_direction(ensemble.atoms[i][0]);
      double s0 = 0.0;
      double s1 = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double x0 = data.xs(j, 0);
        const double x1 = data.xs(j, 1);
        if (c * x0 + s * x1 > 0.0) {
          s0 += w[j] * x0;
          s1 += w[j] * x1;
        }
      }
      g(i, 0) = -s * s0 + c * s1;
    }
    return g;
  }

  for (Eigen::Index i = 0; i < mm; ++i) {
    Coords acc = Coords::Zero(m.domain.dim);
    for (Eigen::Index j = 0; j < n; ++j) acc += w[j] * grad_feature(m, ensemble.atoms[i], row_span(data.xs, j));
    g.row(i) = acc.transpose();
  }
  return g;
}

Eigen::MatrixXd tangent_kernel(const FeatureMatrix& phi) {
  if (phi.rows() < 1 || phi.cols() < 1) throw InvalidInput("empty feature matrix");
  const double scale = 1.0 / (static_cast<double>(phi.rows()) * static_cast<double>(phi.cols()));
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(phi.rows(), phi.rows());
  k.selfadjointView<Eigen::Lower>().rankUpdate(phi, scale);
  k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
  return k;
}

double feature_kernel(const FeatureModel& m, const DataSet& data, const ManifoldPoint& a,
                      const ManifoldPoint& b) {
  if (data.size() < 1) throw InvalidInput("dataset is empty");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < data.size(); ++j) {
    const auto x = row_span(data.xs, j);
    acc += eval_feature(m, a, x) * eval_feature(m, b, x);
  }
  return acc / static_cast<double>(data.size());
}

}  // namespace varpro
