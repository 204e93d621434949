#include "helpers.hpp"

#include "varpro/outer_solver.hpp"

#include <doctest.h>

#include <Eigen/Cholesky>

#include <Eigen/LU>

#include <boost/math/tools/minima.hpp>

using namespace varpro;
using test::random_matrix;
using test::random_vector;

namespace {

const std::vector<Regularizer> kAllRegs{Regularizer::quad(), Regularizer::biased(), Regularizer::unbiased(),
                                        Regularizer::power(1.5), Regularizer::power(3.0)};

FeatureMatrix scalar_phi() {
  FeatureMatrix phi(1, 1);
  phi << 1.0;
  return phi;
}

Eigen::VectorXd scalar_y() { return Eigen::VectorXd::Ones(1); }

// sup_t (s t - f(t)) by bracketed 1-D maximization.
double numeric_conjugate(const Regularizer& reg, double s) {
  const auto neg = [&](double t) { return -(s * t - reg.value(t)); };
  const auto [t, v] = boost::math::tools::brent_find_minima(neg, -50.0, 50.0, 60);
  return -v;
}

// Damped Newton on the primal objective; the curvature of f comes from differencing f'.
Eigen::VectorXd primal_newton(const FeatureMatrix& phi, const Eigen::VectorXd& y, double lambda,
                              const Regularizer& reg, double grad_tol) {
  const double M = phi.cols(), N = phi.rows();
  const Eigen::MatrixXd gram = phi.transpose() * phi / (lambda * N * M * M);
  Eigen::VectorXd u = Eigen::VectorXd::Ones(phi.cols());
  for (int it = 0; it < 500; ++it) {
    const Eigen::VectorXd r = phi * u / M - y;
    Eigen::VectorXd g = phi.transpose() * r / (lambda * N * M);
    Eigen::MatrixXd H = gram;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      g[i] += reg.derivative(u[i]) / M;
      const double e = 1e-6 * std::max(1.0, std::abs(u[i]));
      H(i, i) += (reg.derivative(u[i] + e) - reg.derivative(u[i] - e)) / (2 * e * M);
    }
    if (g.norm() < grad_tol) return u;
    const Eigen::VectorXd d = H.ldlt().solve(g);
    const double f0 = primal_value(phi, y, lambda, reg, u);
    double step = 1.0;
    while (step > 1e-12 && primal_value(phi, y, lambda, reg, u - step * d) > f0 - 1e-4 * step * g.dot(d)) step *= 0.5;
    u -= step * d;
  }
  FAIL("primal Newton did not converge");
  return u;
}

}  // namespace

TEST_CASE("regularizer basics") {
  CHECK(Regularizer::quad().value(3.0) == 9.0);
  CHECK(Regularizer::biased().value(3.0) == 4.5);
  CHECK(Regularizer::unbiased().value(3.0) == 2.0);
  CHECK(Regularizer::power(3.0).value(-2.0) == doctest::Approx(4.0));
  CHECK_THROWS_AS(Regularizer::power(1.0), InvalidInput);
  for (const auto& reg : kAllRegs) {
    CHECK(regularizer_from_string(to_string(reg)).kind == reg.kind);
    CHECK(regularizer_from_string(to_string(reg)).r == reg.r);
  }
  CHECK(regularizer_from_string("f_u").kind == RegKind::QuadUnbiased);
  CHECK_THROWS_AS(regularizer_from_string("nope"), InvalidInput);
}

TEST_CASE("conjugates match a numeric sup and biconjugation") {
  for (const auto& reg : kAllRegs) {
    for (double s : {-2.5, -0.7, 0.0, 0.3, 1.9}) {
      CHECK(reg.conjugate(s) == doctest::Approx(numeric_conjugate(reg, s)).epsilon(1e-8));
      // (f*)' is the maximizer: Fenchel equality.
      const double t = reg.conjugate_derivative(s);
      CHECK(reg.value(t) + reg.conjugate(s) == doctest::Approx(s * t).epsilon(1e-12));
    }
    for (double t : {-1.3, 0.2, 0.9, 2.0}) {
      const auto neg = [&](double s) { return -(s * t - reg.conjugate(s)); };
      const auto [s, v] = boost::math::tools::brent_find_minima(neg, -50.0, 50.0, 60);
      CHECK(-v == doctest::Approx(reg.value(t)).epsilon(1e-8));
    }
  }
}

TEST_CASE("scalar quadratic oracle") {
  const OuterSolution s = solve_quadratic(scalar_phi(), scalar_y(), 0.5, Regularizer::biased());
  CHECK(s.u[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(s.primal_value == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(s.residual[0] == doctest::Approx(-1.0 / 3.0).epsilon(1e-15));
  const Eigen::VectorXd a = dual_variable(s, 0.5);
  CHECK(a[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(dual_value(scalar_phi(), scalar_y(), 0.5, Regularizer::biased(), a) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(s.dual_value == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  // f_b(2/3) + f_b*(2/3) = 4/9 = (2/3)(2/3)
  const Regularizer fb = Regularizer::biased();
  CHECK(fb.value(2.0 / 3.0) + fb.conjugate(2.0 / 3.0) == doctest::Approx(4.0 / 9.0).epsilon(1e-15));
}

TEST_CASE("zero targets") {
  Rng rng(1);
  const FeatureMatrix phi = random_matrix(rng, 10, 4);
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(10);
  for (const auto& reg : {Regularizer::quad(), Regularizer::biased()}) {
    const OuterSolution s = solve_quadratic(phi, y, 0.1, reg);
    CHECK(s.u.norm() == 0.0);
    CHECK(s.primal_value == 0.0);
    CHECK(dual_variable(s, 0.1).norm() == 0.0);
  }
  CHECK(kernel_value(phi, y, 0.1) == 0.0);
  const OuterSolution p = solve_power_r(phi, y, 0.1, 1.5);
  CHECK(p.u.norm() < 1e-12);
  CHECK(p.alpha.norm() < 1e-12);
}

TEST_CASE("unbiased with a unit-weight teacher is exact") {
  Rng rng(2);
  const FeatureMatrix phi = random_matrix(rng, 12, 5);
  const Eigen::VectorXd y = phi * Eigen::VectorXd::Ones(5) / 5.0;
  const OuterSolution s = solve_quadratic(phi, y, 0.01, Regularizer::unbiased());
  CHECK((s.u - Eigen::VectorXd::Ones(5)).norm() < 1e-12);
  CHECK(std::abs(s.primal_value) < 1e-24);
}

TEST_CASE("alpha = 0 dual value") {
  Rng rng(3);
  const FeatureMatrix phi = random_matrix(rng, 6, 3);
  const Eigen::VectorXd y = random_vector(rng, 6);
  for (const auto& reg : kAllRegs) CHECK(dual_value(phi, y, 0.1, reg, Eigen::VectorXd::Zero(6)) == -reg.conjugate(0.0));
}

TEST_CASE("duality, Fenchel and normal equations on random instances") {
  Rng rng(4);
  for (int inst = 0; inst < 60; ++inst) {
    const int M = 1 + int(rng.uniform() * 16), N = 1 + int(rng.uniform() * 64);
    const double lambda = inst % 2 ? 1e-3 : 1e-1;
    const FeatureMatrix phi = random_matrix(rng, N, M);
    const Eigen::VectorXd y = random_vector(rng, N);
    for (const auto& reg : kAllRegs) {
      const OuterSolution s = solve_outer(phi, y, lambda, reg);
      CHECK(std::abs(s.primal_value - s.dual_value) <= 1e-8 * (1 + std::abs(s.primal_value)));
      CHECK((lambda * s.alpha + s.residual).norm() <= 1e-14 * (1 + s.residual.norm()));
      const Eigen::VectorXd h = phi.transpose() * s.alpha / N;
      for (int i = 0; i < M; ++i)
        CHECK(std::abs(reg.value(s.u[i]) + reg.conjugate(h[i]) - s.u[i] * h[i]) <= 1e-8 * (1 + std::abs(s.u[i] * h[i])));
      // Weak duality at a perturbed alpha.
      const Eigen::VectorXd a = s.alpha + random_vector(rng, N);
      CHECK(dual_value(phi, y, lambda, reg, a) <= s.primal_value + 1e-12);
      if (reg.quadratic()) {
        // Stationarity of the primal: the normal equations.
        Eigen::VectorXd g = phi.transpose() * s.residual / (lambda * N);
        for (int i = 0; i < M; ++i) g[i] += reg.derivative(s.u[i]);
        const double scale = (phi.transpose() * y).norm() / (lambda * N) + 1.0;
        CHECK(g.norm() <= 1e-10 * scale);
      }
    }
  }
}

TEST_CASE("kernel identity") {
  for (double lambda : {1e-3, 0.1, 0.5, 2.0}) {
    const double v = kernel_value(scalar_phi(), scalar_y(), lambda);
    CHECK(v == doctest::Approx(1.0 / (1.0 + 2.0 * lambda)).epsilon(1e-15));
    CHECK(solve_quadratic(scalar_phi(), scalar_y(), lambda, Regularizer::quad()).primal_value ==
          doctest::Approx(1.0 / (1.0 + 2.0 * lambda)).epsilon(1e-15));
  }
  Rng rng(5);
  const FeatureMatrix phi = random_matrix(rng, 8, 4);
  const Eigen::VectorXd y = random_vector(rng, 8);
  const double k = kernel_value(phi, y, 0.1);
  CHECK(k == doctest::Approx(solve_quadratic(phi, y, 0.1, Regularizer::quad()).primal_value).epsilon(1e-10));
  CHECK_THROWS_AS(kernel_value(phi, y, 0.0), InvalidInput);
}

TEST_CASE("invalid lambda and shapes") {
  CHECK_THROWS_AS(solve_quadratic(scalar_phi(), scalar_y(), 0.0, Regularizer::biased()), InvalidInput);
  CHECK_THROWS_AS(solve_quadratic(scalar_phi(), scalar_y(), -1.0, Regularizer::biased()), InvalidInput);
  CHECK_THROWS_AS(solve_quadratic(scalar_phi(), scalar_y(), 1.0, Regularizer::power(1.5)), InvalidInput);
  CHECK_THROWS_AS(solve_power_r(scalar_phi(), scalar_y(), 1.0, 0.5), InvalidInput);
  CHECK_THROWS_AS(solve_quadratic(scalar_phi(), Eigen::VectorXd::Ones(2), 1.0, Regularizer::biased()), InvalidInput);
}

TEST_CASE("power-r dual Newton") {
  Rng rng(6);
  SUBCASE("r = 2 coincides with Quad") {
    const FeatureMatrix phi = random_matrix(rng, 20, 7);
    const Eigen::VectorXd y = random_vector(rng, 20);
    const OuterSolution a = solve_power_r(phi, y, 0.05, 2.0);
    const OuterSolution b = solve_quadratic(phi, y, 0.05, Regularizer::quad());
    CHECK((a.u - b.u).norm() <= 1e-8 * (1 + b.u.norm()));
    CHECK(a.primal_value == doctest::Approx(b.primal_value).epsilon(1e-10));
  }
  SUBCASE("r = 1.5 matches a primal Newton oracle") {
    const FeatureMatrix phi = random_matrix(rng, 6, 3);
    const Eigen::VectorXd y = random_vector(rng, 6);
    const Regularizer reg = Regularizer::power(1.5);
    const OuterSolution s = solve_power_r(phi, y, 0.1, 1.5);
    const Eigen::VectorXd u = primal_newton(phi, y, 0.1, reg, 1e-10);
    CHECK(s.primal_value == doctest::Approx(primal_value(phi, y, 0.1, reg, u)).epsilon(1e-10));
    CHECK((s.u - u).norm() < 1e-7);
  }
  SUBCASE("dual Newton reproduces the quadratic solves") {
    const FeatureMatrix phi = random_matrix(rng, 15, 6);
    const Eigen::VectorXd y = random_vector(rng, 15);
    for (const auto& reg : {Regularizer::quad(), Regularizer::biased(), Regularizer::unbiased()}) {
      const OuterSolution a = solve_dual_newton(phi, y, 0.01, reg);
      const OuterSolution b = solve_quadratic(phi, y, 0.01, reg);
      CHECK((a.u - b.u).norm() <= 1e-8 * (1 + b.u.norm()));
    }
  }
  SUBCASE("non-convergence reports the gradient norm") {
    const FeatureMatrix phi = random_matrix(rng, 15, 6);
    const Eigen::VectorXd y = random_vector(rng, 15);
    DualNewtonOptions opts;
    opts.max_iterations = 1;
    opts.tolerance = 1e-300;
    try {
      solve_power_r(phi, y, 0.01, 1.5, opts);
      FAIL("expected SolverError");
    } catch (const SolverError& e) {
      CHECK(e.gradient_norm() > 0.0);
    }
  }
}

TEST_CASE("interpolation limit") {
  CHECK(reduced_risk_zero_limit(scalar_phi(), scalar_y(), Regularizer::quad()) == doctest::Approx(1.0).epsilon(1e-14));

  Rng rng(7);
  SUBCASE("square invertible") {
    const int M = 5;
    const FeatureMatrix phi = random_matrix(rng, M, M);
    const Eigen::VectorXd y = random_vector(rng, M);
    const Eigen::VectorXd u = M * Eigen::MatrixXd(phi).lu().solve(y);
    CHECK(reduced_risk_zero_limit(phi, y, Regularizer::quad()) == doctest::Approx(u.squaredNorm() / M).epsilon(1e-10));
    CHECK(reduced_risk_zero_limit(phi, y, Regularizer::biased()) == doctest::Approx(0.5 * u.squaredNorm() / M).epsilon(1e-10));
  }
  SUBCASE("monotone approach from below") {
    const FeatureMatrix phi = random_matrix(rng, 4, 8);
    const Eigen::VectorXd y = random_vector(rng, 4);
    for (const auto& reg : {Regularizer::quad(), Regularizer::biased(), Regularizer::unbiased()}) {
      const double l0 = reduced_risk_zero_limit(phi, y, reg);
      double prev = -1.0;
      for (double lambda : {1e-2, 1e-4, 1e-6}) {
        const double l = solve_quadratic(phi, y, lambda, reg).primal_value;
        CHECK(l <= l0 * (1 + 1e-12));
        CHECK(l > prev);
        prev = l;
      }
      CHECK(l0 - prev <= 1e-3 * l0);
    }
  }
  SUBCASE("infeasible") {
    const FeatureMatrix phi = random_matrix(rng, 8, 3);
    CHECK_THROWS_AS(reduced_risk_zero_limit(phi, random_vector(rng, 8), Regularizer::quad()), Infeasible);
  }
}
