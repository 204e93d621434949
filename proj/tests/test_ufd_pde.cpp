#include "helpers.hpp"

#include "varpro/ufd_pde.hpp"

#include <doctest.h>

#include <complex>

using namespace varpro;
using test::kPi;

namespace {

// Derivative of periodic samples by a direct DFT (n is small in these tests).
Eigen::VectorXd spectral_derivative(const Eigen::VectorXd& f) {
  const int n = static_cast<int>(f.size());
  std::vector<std::complex<double>> c(n);
  for (int k = 0; k < n; ++k) {
    std::complex<double> s = 0.0;
    for (int j = 0; j < n; ++j) s += f[j] * std::polar(1.0, -2 * kPi * k * j / n);
    c[k] = s / double(n);
  }
  Eigen::VectorXd d(n);
  for (int j = 0; j < n; ++j) {
    std::complex<double> s = 0.0;
    for (int k = 0; k < n; ++k) {
      const int freq = k <= n / 2 ? k : k - n;
      if (2 * k == n) continue;  // Nyquist mode has no odd derivative
      s += std::complex<double>(0.0, freq) * c[k] * std::polar(1.0, 2 * kPi * k * j / n);
    }
    d[j] = s.real();
  }
  return d;
}

DensityField field(const Grid1D& g, const std::function<double(double)>& f) {
  DensityField out{g, Eigen::VectorXd(g.n_cells)};
  for (int j = 0; j < g.n_cells; ++j) out.values[j] = f(g.center(j));
  return out;
}

DensityField teacher_field(double gamma, int n) { return grid_teacher_density(TeacherSpec::circle_default(gamma, 16), Grid1D{n}); }

}  // namespace

TEST_CASE("config validation") {
  PdeConfig c;
  c.snapshot_times = {0.0, 1.0};
  CHECK_NOTHROW(c.validate());
  c.r = 1.0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c.r = 2.0;
  c.snapshot_times = {1.0, 0.5};
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  CHECK_THROWS_AS(Grid1D{100}.validate(), InvalidInput);
  CHECK_THROWS_AS(Grid1D{8}.validate(), InvalidInput);
}

TEST_CASE("rhs stationarity and conservation") {
  const DensityField bar = teacher_field(100.0, 512);
  PdeConfig c;
  CHECK(pde_rhs(bar, bar, c).cwiseAbs().maxCoeff() == 0.0);
  const DensityField u = DensityField::uniform(Grid1D{64});
  CHECK(pde_rhs(u, u, c).cwiseAbs().maxCoeff() == 0.0);

  Rng rng(3);
  for (int it = 0; it < 50; ++it) {
    DensityField mu = DensityField::uniform(Grid1D{128});
    for (int j = 0; j < 128; ++j) mu.values[j] *= 0.2 + rng.uniform();
    DensityField b = DensityField::uniform(Grid1D{128});
    for (int j = 0; j < 128; ++j) b.values[j] *= 0.2 + rng.uniform();
    c.r = 1.5 + rng.uniform();
    const Eigen::VectorXd rhs = pde_rhs(mu, b, c);
    CHECK(std::abs(rhs.sum()) <= 1e-13 * rhs.cwiseAbs().sum());
  }

  DensityField bad = DensityField::uniform(Grid1D{64});
  bad.values[3] = 0.0;
  CHECK_THROWS_AS(pde_rhs(bad, u, c), InvalidInput);
}

TEST_CASE("rhs is second-order accurate against a spectral discretization") {
  const double C = 0.7;
  std::vector<double> errs;
  for (int n : {32, 64, 128, 256}) {
    const Grid1D g{n};
    const DensityField bar = field(g, [](double w) { return 1.0 + 0.5 * std::cos(w); });
    const DensityField mu = field(g, [](double w) { return (1.0 + 0.5 * std::cos(w)) * (1.0 + 0.1 * std::sin(w)); });
    PdeConfig c;
    c.C = C;
    const Eigen::VectorXd fv = pde_rhs(mu, bar, c);
    const Eigen::VectorXd gg = (bar.values.array() / mu.values.array()).square().matrix();
    const Eigen::VectorXd flux = (mu.values.array() * spectral_derivative(gg).array()).matrix();
    const Eigen::VectorXd ref = -C * spectral_derivative(flux);
    errs.push_back((fv - ref).cwiseAbs().maxCoeff());
  }
  for (std::size_t k = 0; k + 1 < errs.size(); ++k) {
    const double order = std::log2(errs[k] / errs[k + 1]);
    CHECK(order > 1.8);
    CHECK(order < 2.2);
  }
}

TEST_CASE("jacobian matches finite differences") {
  Rng rng(8);
  const int n = 32;
  Eigen::VectorXd mu(n), bar(n);
  for (int j = 0; j < n; ++j) {
    mu[j] = 0.3 + rng.uniform();
    bar[j] = 0.3 + rng.uniform();
  }
  const double h = 2 * kPi / n;
  for (double r : {2.0, 1.5, 3.0}) {
    const Eigen::MatrixXd J = Eigen::MatrixXd(pde_jacobian(mu, bar, h, r, 0.8));
    for (int k = 0; k < n; ++k) {
      Eigen::VectorXd p = mu, m = mu;
      p[k] += 1e-6;
      m[k] -= 1e-6;
      const Eigen::VectorXd col = (pde_rhs(p, bar, h, r, 0.8) - pde_rhs(m, bar, h, r, 0.8)) / 2e-6;
      CHECK((J.col(k) - col).norm() <= 1e-6 * (1 + col.norm()));
    }
  }
}

TEST_CASE("stationary start stays put") {
  const DensityField bar = teacher_field(100.0, 512);
  PdeConfig c;
  c.snapshot_times = {0.0, 1.0, 5.0, 10.0};
  const PdeSolution s = step_to(bar, bar, c);
  REQUIRE(s.snapshots.size() == 4);
  CHECK(s.times == c.snapshot_times);
  for (const auto& f : s.snapshots) {
    CHECK((f.values - bar.values).cwiseAbs().maxCoeff() <= c.abs_tol);
    CHECK(std::abs(f.mass() - 1.0) <= 1e-10);
  }
}

TEST_CASE("uniform start relaxes toward the teacher") {
  const DensityField bar = teacher_field(100.0, 512);
  PdeConfig c;
  c.snapshot_times = {0.0, 0.5, 1.0, 2.0, 4.0};
  c.C = 1.0;
  const PdeSolution s = step_to(DensityField::uniform(bar.grid), bar, c);
  REQUIRE(s.snapshots.size() == 5);
  CHECK(s.stats.floor_events == 0);
  for (std::size_t k = 0; k < s.snapshots.size(); ++k) {
    CHECK(std::abs(s.snapshots[k].mass() - 1.0) <= 1e-10);
    CHECK(s.snapshots[k].strictly_positive());
    if (k == 0) continue;
    CHECK(chi2_on_grid(bar, s.snapshots[k]) < chi2_on_grid(bar, s.snapshots[k - 1]));
    CHECK(lyapunov(bar, s.snapshots[k], 2.0) <= lyapunov(bar, s.snapshots[k - 1], 2.0));
    CHECK(log_density_ratio_sup(bar, s.snapshots[k]) <= log_density_ratio_sup(bar, s.snapshots[k - 1]) + 1e-12);
  }
}

TEST_CASE("general r also decreases the Lyapunov functional") {
  const DensityField bar = teacher_field(10.0, 256);
  PdeConfig c;
  c.r = 1.5;
  c.snapshot_times = {0.0, 0.25, 0.5, 1.0};
  const PdeSolution s = step_to(DensityField::uniform(bar.grid), bar, c);
  for (std::size_t k = 1; k < s.snapshots.size(); ++k)
    CHECK(lyapunov(bar, s.snapshots[k], 1.5) < lyapunov(bar, s.snapshots[k - 1], 1.5));
}

TEST_CASE("step budget exhaustion raises PdeError") {
  const DensityField bar = teacher_field(100.0, 128);
  PdeConfig c;
  c.snapshot_times = {1.0};
  c.max_steps = 3;
  CHECK_THROWS_AS(step_to(DensityField::uniform(bar.grid), bar, c), PdeError);
}

TEST_CASE("chi-square on a two-level field") {
  const Grid1D g{16};
  DensityField bar{g, Eigen::VectorXd(16)};
  for (int j = 0; j < 16; ++j) bar.values[j] = (j < 8 ? 1.5 : 0.5) / (2 * kPi);
  const DensityField u = DensityField::uniform(g);
  // Half the circle at ratio 1.5 and half at 0.5: 0.5 * 0.25 + 0.5 * 0.25.
  CHECK(chi2_on_grid(bar, u) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(chi2_on_grid(bar, bar) == 0.0);
  CHECK(chi2_on_grid(u, bar) >= 0.0);
  DensityField z = u;
  z.values[0] = 0.0;
  CHECK_THROWS_AS(chi2_on_grid(bar, z), InvalidInput);
}

TEST_CASE("log-density ratio") {
  const DensityField bar = teacher_field(100.0, 512);
  CHECK(log_density_ratio_sup(bar, bar) == 0.0);
  const DensityField flat = teacher_field(0.0, 512);
  CHECK(log_density_ratio_sup(flat, DensityField::uniform(flat.grid)) <= 1e-14);

  std::vector<double> v;
  for (int n : {256, 512, 1024, 2048}) {
    const DensityField b = teacher_field(100.0, n);
    v.push_back(log_density_ratio_sup(b, DensityField::uniform(b.grid)));
  }
  CHECK(std::abs(v[3] - v[2]) < std::abs(v[2] - v[1]));
  CHECK(std::abs(v[2] - v[1]) < std::abs(v[1] - v[0]));
  // Continuum limit: the largest |log(2 pi mu_gamma)| over a fine scan of the circle.
  const TeacherSpec spec = TeacherSpec::circle_default(100.0, 16);
  double limit = 0.0;
  for (int k = 0; k < 200000; ++k)
    limit = std::max(limit, std::abs(std::log(2 * kPi * mu_gamma_density(2 * kPi * k / 200000.0, spec))));
  CHECK(v[3] == doctest::Approx(limit).epsilon(1e-3));
}
