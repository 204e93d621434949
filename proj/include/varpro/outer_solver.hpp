#pragma once

#include "varpro/types.hpp"

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <string_view>

namespace varpro {

enum class RegKind { Quad, QuadBiased, QuadUnbiased, PowerR };

/// Outer-weight regularizer f.
///
///   Quad          f(t) = t^2
///   QuadBiased    f(t) = t^2 / 2
///   QuadUnbiased  f(t) = (t - 1)^2 / 2
///   PowerR        f(t) = |t|^r / (r - 1),  r > 1
///
/// The conjugate f* is closed-form for every kind. For PowerR with conjugate
/// exponent q = r / (r - 1):  f*(s) = ((r-1)/r)^q |s|^q.
struct Regularizer {
  RegKind kind = RegKind::QuadBiased;
  double r = 2.0;

  static Regularizer quad() { return {RegKind::Quad, 2.0}; }
  static Regularizer biased() { return {RegKind::QuadBiased, 2.0}; }
  static Regularizer unbiased() { return {RegKind::QuadUnbiased, 2.0}; }
  static Regularizer power(double r);

  bool quadratic() const { return kind != RegKind::PowerR; }
  void validate() const;

  double value(double t) const;
  double derivative(double t) const;
  double conjugate(double s) const;
  /// (f*)'(s), the maximizer t of s t - f(t).
  double conjugate_derivative(double s) const;
  double conjugate_second(double s) const;
};

std::string to_string(const Regularizer& reg);
Regularizer regularizer_from_string(std::string_view name);

/// Optimal outer weights for fixed features together with the dual certificate.
/// residual_j = F(x_j) - Y_j and lambda * alpha_j = -residual_j.
struct OuterSolution {
  Eigen::VectorXd u;
  Eigen::VectorXd residual;
  Eigen::VectorXd alpha;
  double primal_value = 0.0;
  double dual_value = 0.0;
  int iterations = 0;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double gradient_norm = 0.0)
      : std::runtime_error(what), gradient_norm_(gradient_norm) {}
  double gradient_norm() const { return gradient_norm_; }

 private:
  double gradient_norm_;
};

class Infeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// (1/(2 lambda N)) |Phi u / M - Y|^2 + (1/M) sum_i f(u_i)
double primal_value(const FeatureMatrix& phi, const Eigen::VectorXd& y, double lambda,
                    const Regularizer& reg, const Eigen::VectorXd& u);

/// -(1/M) sum_i f*(h_i) + (1/N) <alpha, Y> - (lambda/(2N)) |alpha|^2, h = Phi^T alpha / N.
double dual_value(const FeatureMatrix& phi, const Eigen::VectorXd& y, double lambda,
                  const Regularizer& reg, const Eigen::VectorXd& alpha);

/// Ridge solve through the M x M normal equations (Cholesky).
OuterSolution solve_quadratic(const FeatureMatrix& phi, const Eigen::VectorXd& y, double lambda,
                              const Regularizer& reg);

/// alpha = -residual / lambda.
Eigen::VectorXd dual_variable(const OuterSolution& sol, double lambda);

/// (1/N) Y^T (K + 2 lambda I)^{-1} Y with K = Phi Phi^T / (N M). Equals the Quad
/// reduced risk.
double kernel_value(const FeatureMatrix& phi, const Eigen::VectorXd& y, double lambda);

struct DualNewtonOptions {
  double tolerance = 1e-10;  ///< on |Y - Phi u / M - lambda alpha|_inf
  int max_iterations = 100;
};

/// Damped Newton ascent on the concave dual; works for every regularizer kind.
OuterSolution solve_dual_newton(const FeatureMatrix& phi, const Eigen::VectorXd& y, double lambda,
                                const Regularizer& reg, const DualNewtonOptions& opts = {});

OuterSolution solve_power_r(const FeatureMatrix& phi, const Eigen::VectorXd& y, double lambda, double r,
                            const DualNewtonOptions& opts = {});

/// Dispatches to solve_quadratic or solve_power_r.
OuterSolution solve_outer(const FeatureMatrix& phi, const Eigen::VectorXd& y, double lambda,
                          const Regularizer& reg);

/// Interpolation limit min_{Phi u / M = Y} (1/M) sum_i f(u_i) through the
/// pseudo-inverse. Quadratic regularizers only. Throws Infeasible when Y is not in
/// the range of Phi / M.
double reduced_risk_zero_limit(const FeatureMatrix& phi, const Eigen::VectorXd& y, const Regularizer& reg,
                               double feasibility_tol = 1e-8);

}  // namespace varpro
