#include "varpro/outer_solver.hpp"

#include "varpro/geometry.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>
#include <sstream>

namespace varpro {

namespace {

void check_shapes(const FeatureMatrix& phi, const Eigen::VectorXd& y) {
  if (phi.rows() < 1 || phi.cols() < 1) throw InvalidInput("empty feature matrix");
  if (y.size() != phi.rows()) throw InvalidInput("target length does not match feature rows");
}

void check_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidInput("lambda must be positive");
}

double sign(double x) { return (x > 0.0) - (x < 0.0); }

// Smallest |s| used in the PowerR conjugate curvature when q < 2.
constexpr double kCurvatureFloor = 1e-12;

OuterSolution finish(const FeatureMatrix& phi, const Eigen::VectorXd& y, double lambda,
                     const Regularizer& reg, Eigen::VectorXd u, int iterations) {
  const double m = static_cast<double>(phi.cols());
  OuterSolution sol;
  sol.residual = phi * u / m - y;
  sol.u = std::move(u);
  sol.alpha = -sol.residual / lambda;
  sol.primal_value = primal_value(phi, y, lambda, reg, sol.u);
  sol.dual_value = dual_value(phi, y, lambda, reg, sol.alpha);
  sol.iterations = iterations;
  return sol;
}

}  // namespace

Regularizer Regularizer::power(double r) {
  Regularizer reg{RegKind::PowerR, r};
  reg.validate();
  return reg;
}

void Regularizer::validate() const {
  if (kind == RegKind::PowerR && (!(r > 1.0) || !std::isfinite(r))) {
    throw InvalidInput("power regularizer needs r > 1");
  }
}

double Regularizer::value(double t) const {
  switch (kind) {
    case RegKind::Quad: return t * t;
    case RegKind::QuadBiased: return 0.5 * t * t;
    case RegKind::QuadUnbiased: return 0.5 * (t - 1.0) * (t - 1.0);
    case RegKind::PowerR: return std::pow(std::abs(t), r) / (r - 1.0);
  }
  return 0.0;
}

double Regularizer::derivative(double t) const {
  switch (kind) {
    case RegKind::Quad: return 2.0 * t;
    case RegKind::QuadBiased: return t;
    case RegKind::QuadUnbiased: return t - 1.0;
    case RegKind::PowerR: return r / (r - 1.0) * std::pow(std::abs(t), r - 1.0) * sign(t);
  }
  return 0.0;
}

double Regularizer::conjugate(double s) const {
  switch (kind) {
    case RegKind::Quad: return 0.25 * s * s;
    case RegKind::QuadBiased: return 0.5 * s * s;
    case RegKind::QuadUnbiased: return s + 0.5 * s * s;
    case RegKind::PowerR: {
      const double q = r / (r - 1.0);
      return std::pow((r - 1.0) / r, q) * std::pow(std::abs(s), q);
    }
  }
  return 0.0;
}

double Regularizer::conjugate_derivative(double s) const {
  switch (kind) {
    case RegKind::Quad: return 0.5 * s;
    case RegKind::QuadBiased: return s;
    case RegKind::QuadUnbiased: return 1.0 + s;
    case RegKind::PowerR: {
      const double q = r / (r - 1.0);
      return std::pow((r - 1.0) / r, q - 1.0) * std::pow(std::abs(s), q - 1.0) * sign(s);
    }
  }
  return 0.0;
}

double Regularizer::conjugate_second(double s) const {
  switch (kind) {
    case RegKind::Quad: return 0.5;
    case RegKind::QuadBiased: return 1.0;
    case RegKind::QuadUnbiased: return 1.0;
    case RegKind::PowerR: {
      const double q = r / (r - 1.0);
      const double a = std::max(std::abs(s), kCurvatureFloor);
      return (q - 1.0) * std::pow((r - 1.0) / r, q - 1.0) * std::pow(a, q - 2.0);
    }
  }
  return 0.0;
}

std::string to_string(const Regularizer& reg) {
  switch (reg.kind) {
    case RegKind::Quad: return "quad";
    case RegKind::QuadBiased: return "biased";
    case RegKind::QuadUnbiased: return "unbiased";
    case RegKind::PowerR: {
      std::ostringstream os;
      os.precision(17);
      os << "power:" << reg.r;
      return os.str();
    }
  }
  return "?";
}

Regularizer regularizer_from_string(std::string_view name) {
  if (name == "quad") return Regularizer::quad();
  if (name == "biased" || name == "f_b") return Regularizer::biased();
  if (name == "unbiased" || name == "f_u") return Regularizer::unbiased();
  if (name.starts_with("power:")) {
    try {
      return Regularizer::power(std::stod(std::string(name.substr(6))));
    } catch (const std::logic_error&) {
      throw InvalidInput("bad power regularizer: " + std::string(name));
    }
  }
  throw InvalidInput("unknown regularizer: " + std::string(name));
}

double primal_value(const FeatureMatrix& phi, const Eigen::VectorXd& y, double lambda,
                    const Regularizer& reg, const Eigen::VectorXd& u) {
  check_shapes(phi, y);
  if (u.size() != phi.cols()) throw InvalidInput("outer weight length mismatch");
  const double n = static_cast<double>(phi.rows());
  const double m = static_cast<double>(phi.cols());
  const double fit = (phi * u / m - y).squaredNorm() / (2.0 * lambda * n);
  double penalty = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) penalty += reg.value(u[i]);
  return fit + penalty / m;
}

double dual_value(const FeatureMatrix& phi, const Eigen::VectorXd& y, double lambda,
                  const Regularizer& reg, const Eigen::VectorXd& alpha) {
  check_shapes(phi, y);
  if (alpha.size() != phi.rows()) throw InvalidInput("dual variable length mismatch");
  const double n = static_cast<double>(phi.rows());
  const double m = static_cast<double>(phi.cols());
  const Eigen::VectorXd h = phi.transpose() * alpha / n;
  double conj = 0.0;
  for (Eigen::Index i = 0; i < h.size(); ++i) conj += reg.conjugate(h[i]);
  return -conj / m + alpha.dot(y) / n - lambda / (2.0 * n) * alpha.squaredNorm();
}

OuterSolution solve_quadratic(const FeatureMatrix& phi, const Eigen::VectorXd& y, double lambda,
                              const Regularizer& reg) {
  check_shapes(phi, y);
  check_lambda(lambda);
  if (!reg.quadratic()) throw InvalidInput("solve_quadratic needs a quadratic regularizer");

  const Eigen::Index mm = phi.cols();
  const double n = static_cast<double>(phi.rows());
  const double m = static_cast<double>(mm);
  const double ridge = reg.kind == RegKind::Quad ? 2.0 * lambda : lambda;

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(mm, mm);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(phi.transpose(), 1.0 / (n * m));
  gram.diagonal().array() += ridge;

  Eigen::VectorXd target = y;
  if (reg.kind == RegKind::QuadUnbiased) target -= phi.rowwise().sum() / m;
  const Eigen::VectorXd rhs = phi.transpose() * target / n;

  Eigen::LLT<Eigen::MatrixXd> llt(gram.selfadjointView<Eigen::Lower>());
  if (llt.info() != Eigen::Success) throw SolverError("normal equations are not numerically positive definite");
  Eigen::VectorXd u = llt.solve(rhs);
  if (!u.allFinite()) throw SolverError("normal equation solve produced non-finite weights");
  if (reg.kind == RegKind::QuadUnbiased) u.array() += 1.0;

  return finish(phi, y, lambda, reg, std::move(u), 1);
}

Eigen::VectorXd dual_variable(const OuterSolution& sol, double lambda) {
  check_lambda(lambda);
  return -sol.residual / lambda;
}

double kernel_value(const FeatureMatrix& phi, const Eigen::VectorXd& y, double lambda) {
  check_shapes(phi, y);
  check_lambda(lambda);
  const double n = static_cast<double>(phi.rows());
  const double m = static_cast<double>(phi.cols());
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(phi.rows(), phi.rows());
  k.selfadjointView<Eigen::Lower>().rankUpdate(phi, 1.0 / (n * m));
  k.diagonal().array() += 2.0 * lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(k.selfadjointView<Eigen::Lower>());
  if (llt.info() != Eigen::Success) throw SolverError("kernel system is not numerically positive definite");
  return y.dot(llt.solve(y)) / n;
}

OuterSolution solve_dual_newton(const FeatureMatrix& phi, const Eigen::VectorXd& y, double lambda,
                                const Regularizer& reg, const DualNewtonOptions& opts) {
  check_shapes(phi, y);
  check_lambda(lambda);
  reg.validate();

  const Eigen::Index nn = phi.rows();
  const Eigen::Index mm = phi.cols();
  const double n = static_cast<double>(nn);
  const double m = static_cast<double>(mm);

  // The objective is scaled by N so that its gradient is Y - Phi u / M - lambda alpha.
  auto objective = [&](const Eigen::VectorXd& alpha) { return n * dual_value(phi, y, lambda, reg, alpha); };
  auto weights_from = [&](const Eigen::VectorXd& h) {
    Eigen::VectorXd u(mm);
    for (Eigen::Index i = 0; i < mm; ++i) u[i] = reg.conjugate_derivative(h[i]);
    return u;
  };

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(nn);
  double value = objective(alpha);
  double grad_norm = 0.0;

  for (int it = 0; it <= opts.max_iterations; ++it) {
    const Eigen::VectorXd h = phi.transpose() * alpha / n;
    const Eigen::VectorXd u = weights_from(h);
    const Eigen::VectorXd grad = y - phi * u / m - lambda * alpha;
    grad_norm = grad.lpNorm<Eigen::Infinity>();
    if (grad_norm <= opts.tolerance) return finish(phi, y, lambda, reg, u, it);
    if (it == opts.max_iterations) break;

    // Negative Hessian: lambda I + Phi diag(f*''(h)) Phi^T / (N M).
    Eigen::VectorXd curvature(mm);
    for (Eigen::Index i = 0; i < mm; ++i) curvature[i] = reg.conjugate_second(h[i]);
    const FeatureMatrix scaled = phi * curvature.asDiagonal();
    Eigen::MatrixXd hess = scaled * phi.transpose() / (n * m);
    hess.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    if (ldlt.info() != Eigen::Success) throw SolverError("dual Newton system factorization failed", grad_norm);
    const Eigen::VectorXd step = ldlt.solve(grad);

    double t = 1.0;
    Eigen::VectorXd trial = alpha + step;
    double trial_value = objective(trial);
    const double slack = 1e-15 * (1.0 + std::abs(value));
    int halvings = 0;
    while (!(trial_value >= value - slack) && halvings < 60) {
      t *= 0.5;
      trial = alpha + t * step;
      trial_value = objective(trial);
      ++halvings;
    }
    if (!(trial_value >= value - slack)) {
      throw SolverError("dual Newton line search failed", grad_norm);
    }
    alpha = std::move(trial);
    value = trial_value;
  }

  std::ostringstream os;
  os << "dual Newton did not converge in " << opts.max_iterations << " iterations (gradient norm "
     << grad_norm << ")";
  throw SolverError(os.str(), grad_norm);
}

OuterSolution solve_power_r(const FeatureMatrix& phi, const Eigen::VectorXd& y, double lambda, double r,
                            const DualNewtonOptions& opts) {
  return solve_dual_newton(phi, y, lambda, Regularizer::power(r), opts);
}

OuterSolution solve_outer(const FeatureMatrix& phi, const Eigen::VectorXd& y, double lambda,
                          const Regularizer& reg) {
  if (reg.quadratic()) return solve_quadratic(phi, y, lambda, reg);
  return solve_power_r(phi, y, lambda, reg.r);
}

double reduced_risk_zero_limit(const FeatureMatrix& phi, const Eigen::VectorXd& y, const Regularizer& reg,
                               double feasibility_tol) {
  check_shapes(phi, y);
  if (!reg.quadratic()) throw InvalidInput("the interpolation limit is implemented for quadratic regularizers");
  const double m = static_cast<double>(phi.cols());
  const Eigen::MatrixXd a = phi / m;

  Eigen::VectorXd target = y;
  if (reg.kind == RegKind::QuadUnbiased) target -= a.rowwise().sum();

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  const Eigen::VectorXd v = cod.solve(target);
  if ((a * v - target).norm() > feasibility_tol * (1.0 + target.norm())) {
    throw Infeasible("target is not in the range of the feature operator");
  }
  const double sq = v.squaredNorm() / m;
  return reg.kind == RegKind::Quad ? sq : 0.5 * sq;
}

}  // namespace varpro
