#include "varpro/ufd_pde.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace varpro {

namespace {

void check_positive(const Eigen::VectorXd& v, const char* what) {
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (!(v[j] > 0.0) || !std::isfinite(v[j])) {
      throw InvalidInput(std::string(what) + " must be finite and strictly positive");
    }
  }
}

void check_pair(const DensityField& a, const DensityField& b) {
  if (!(a.grid == b.grid)) throw InvalidInput("density fields live on different grids");
  if (a.values.size() != a.grid.n_cells || b.values.size() != b.grid.n_cells) {
    throw InvalidInput("density field size does not match its grid");
  }
  check_positive(a.values, "density");
  check_positive(b.values, "density");
}

// TR-BDF2 constants.
const double kGamma = 2.0 - std::sqrt(2.0);
const double kD = kGamma / 2.0;
const double kErrConst = (-3.0 * kGamma * kGamma + 4.0 * kGamma - 2.0) / (12.0 * (2.0 - kGamma));
constexpr int kNewtonMaxIter = 10;
constexpr double kNewtonTol = 1e-2;

class Integrator {
 public:
  Integrator(const Eigen::VectorXd& mubar, double h_grid, const PdeConfig& cfg)
      : mubar_(mubar), hx_(h_grid), cfg_(cfg) {}

  PdeStats stats;

  Eigen::VectorXd f(const Eigen::VectorXd& y) const { return pde_rhs(y, mubar_, hx_, cfg_.r, cfg_.C); }

  double wnorm(const Eigen::VectorXd& e, const Eigen::VectorXd& y0, const Eigen::VectorXd& y1) const {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < e.size(); ++j) {
      const double w = cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(y0[j]), std::abs(y1[j]));
      const double q = e[j] / w;
      acc += q * q;
    }
    return std::sqrt(acc / static_cast<double>(e.size()));
  }

  // Solves z - d h f(z) = rhs by simplified Newton with the factored iteration matrix.
  bool newton(const Eigen::SparseLU<Eigen::SparseMatrix<double>>& lu, double dh, const Eigen::VectorXd& rhs,
              Eigen::VectorXd& z, const Eigen::VectorXd& yref) const {
    double prev = 0.0;
    for (int it = 0; it < kNewtonMaxIter; ++it) {
      if (!(z.array() > 0.0).all()) return false;
      const Eigen::VectorXd res = z - dh * f(z) - rhs;
      const Eigen::VectorXd delta = lu.solve(res);
      z -= delta;
      const double nd = wnorm(delta, yref, z);
      if (!std::isfinite(nd)) return false;
      if (nd <= kNewtonTol) return (z.array() > 0.0).all();
      if (it > 0 && nd > 0.9 * prev) return false;
      prev = nd;
    }
    return false;
  }

  // One attempted step of size dt from y. Returns the error norm, or +inf when
  // the nonlinear solve failed.
  double attempt(const Eigen::VectorXd& y, const Eigen::VectorXd& fy, double dt, Eigen::VectorXd& y_next) const {
    const Eigen::Index n = y.size();
    const double dh = kD * dt;
    Eigen::SparseMatrix<double> iter = -dh * pde_jacobian(y, mubar_, hx_, cfg_.r, cfg_.C);
    Eigen::SparseMatrix<double> eye(n, n);
    eye.setIdentity();
    iter += eye;
    iter.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(iter);
    if (lu.info() != Eigen::Success) return std::numeric_limits<double>::infinity();

    Eigen::VectorXd yg = y + kGamma * dt * fy;
    if (!(yg.array() > 0.0).all()) yg = y;
    if (!newton(lu, dh, y + dh * fy, yg, y)) return std::numeric_limits<double>::infinity();

    const double g2 = kGamma * (2.0 - kGamma);
    const Eigen::VectorXd rhs2 = yg / g2 - ((1.0 - kGamma) * (1.0 - kGamma) / g2) * y;
    y_next = yg;
    if (!newton(lu, dh, rhs2, y_next, y)) return std::numeric_limits<double>::infinity();

    const Eigen::VectorXd fg = f(yg);
    const Eigen::VectorXd f1 = f(y_next);
    const Eigen::VectorXd est =
        (2.0 * kErrConst * dt) * (fy / kGamma - fg / (kGamma * (1.0 - kGamma)) + f1 / (1.0 - kGamma));
    const Eigen::VectorXd err = lu.solve(est);
    return wnorm(err, y, y_next);
  }

  void finalize(Eigen::VectorXd& y) {
    for (Eigen::Index j = 0; j < y.size(); ++j) {
      if (y[j] < cfg_.positivity_floor) {
        y[j] = cfg_.positivity_floor;
        ++stats.floor_events;
      }
    }
    y /= hx_ * y.sum();
  }

 private:
  const Eigen::VectorXd& mubar_;
  double hx_;
  const PdeConfig& cfg_;
};

}  // namespace

void PdeConfig::validate() const {
  if (!(r > 1.0) || !std::isfinite(r)) throw InvalidInput("pde exponent r must exceed 1");
  if (!(C > 0.0) || !std::isfinite(C)) throw InvalidInput("pde coefficient must be positive");
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw InvalidInput("pde tolerances must be positive");
  if (!(positivity_floor > 0.0)) throw InvalidInput("positivity floor must be positive");
  if (!(initial_step > 0.0)) throw InvalidInput("initial step must be positive");
  double prev = 0.0;
  for (double t : snapshot_times) {
    if (!(t >= prev) || !std::isfinite(t)) throw InvalidInput("snapshot times must be finite, >= 0, sorted");
    prev = t;
  }
}

Eigen::VectorXd pde_rhs(const Eigen::VectorXd& mu, const Eigen::VectorXd& mubar, double h, double r, double C) {
  const Eigen::Index n = mu.size();
  if (mubar.size() != n || n < 3) throw InvalidInput("pde_rhs size mismatch");
  check_positive(mu, "density");
  check_positive(mubar, "reference density");

  Eigen::VectorXd g(n);
  for (Eigen::Index j = 0; j < n; ++j) g[j] = std::pow(mubar[j] / mu[j], r);
  // flux[j] is the flux through the face between cells j and j+1.
  Eigen::VectorXd flux(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index k = (j + 1) % n;
    flux[j] = C * 0.5 * (mu[j] + mu[k]) * (g[k] - g[j]) / h;
  }
  Eigen::VectorXd out(n);
  for (Eigen::Index j = 0; j < n; ++j) out[j] = -(flux[j] - flux[(j + n - 1) % n]) / h;
  return out;
}

Eigen::VectorXd pde_rhs(const DensityField& mu, const DensityField& mubar, const PdeConfig& cfg) {
  check_pair(mu, mubar);
  return pde_rhs(mu.values, mubar.values, mu.grid.h(), cfg.r, cfg.C);
}

Eigen::SparseMatrix<double> pde_jacobian(const Eigen::VectorXd& mu, const Eigen::VectorXd& mubar, double h,
                                         double r, double C) {
  const Eigen::Index n = mu.size();
  Eigen::VectorXd g(n), dg(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    g[j] = std::pow(mubar[j] / mu[j], r);
    dg[j] = -r * g[j] / mu[j];
  }
  // Face j joins cells j and j+1: derivatives of its flux w.r.t. both cells.
  Eigen::VectorXd dleft(n), dright(n);
  const double c = C / h;
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index k = (j + 1) % n;
    const double avg = 0.5 * (mu[j] + mu[k]);
    const double jump = g[k] - g[j];
    dleft[j] = c * (0.5 * jump - avg * dg[j]);
    dright[j] = c * (0.5 * jump + avg * dg[k]);
  }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(3 * n));
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index jp = (j + 1) % n;
    const Eigen::Index jm = (j + n - 1) % n;
    // rhs_j = -(flux[j] - flux[jm]) / h
    trip.emplace_back(j, jp, -dright[j] / h);
    trip.emplace_back(j, j, -(dleft[j] - dright[jm]) / h);
    trip.emplace_back(j, jm, dleft[jm] / h);
  }
  Eigen::SparseMatrix<double> jac(n, n);
  jac.setFromTriplets(trip.begin(), trip.end());
  return jac;
}

PdeSolution step_to(const DensityField& mu0, const DensityField& mubar, const PdeConfig& cfg) {
  cfg.validate();
  mu0.grid.validate();
  check_pair(mu0, mubar);

  const double hx = mu0.grid.h();
  Eigen::VectorXd y = mu0.values / mu0.mass();
  Integrator integ(mubar.values, hx, cfg);

  PdeSolution out;
  double t = 0.0;
  double dt = cfg.initial_step;
  long steps = 0;
  Eigen::VectorXd fy = integ.f(y);

  for (double target : cfg.snapshot_times) {
    while (t < target) {
      const double remaining = target - t;
      const bool last = dt >= remaining * (1.0 - 1e-12);
      const double h = last ? remaining : dt;
      if (h < 1e-14 * std::max(1.0, std::abs(t))) {
        std::ostringstream os;
        os << "pde step size underflow at t=" << t << " (h=" << h << ", min density " << y.minCoeff() << ")";
        throw PdeError(os.str(), t, h);
      }
      if (++steps > cfg.max_steps) throw PdeError("pde step budget exhausted", t, h);

      Eigen::VectorXd y_next;
      const double err = integ.attempt(y, fy, h, y_next);
      if (!std::isfinite(err)) {
        ++integ.stats.newton_failures;
        ++integ.stats.rejected;
        dt = 0.25 * h;
        continue;
      }
      if (err > 1.0) {
        ++integ.stats.rejected;
        dt = h * std::clamp(0.9 * std::cbrt(1.0 / err), 0.2, 1.0);
        continue;
      }
      ++integ.stats.accepted;
      integ.finalize(y_next);
      y = std::move(y_next);
      fy = integ.f(y);
      t = last ? target : t + h;
      const double factor = err > 0.0 ? std::clamp(0.9 * std::cbrt(1.0 / err), 0.2, 5.0) : 5.0;
      // Keep the unclipped step when the previous one was shortened to hit a snapshot.
      dt = last ? std::max(dt, h * factor) : h * factor;
    }
    out.times.push_back(target);
    out.snapshots.push_back(DensityField{mu0.grid, y});
  }
  out.stats = integ.stats;
  return out;
}

double chi2_on_grid(const DensityField& mubar, const DensityField& mu) {
  check_pair(mu, mubar);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < mu.values.size(); ++j) {
    const double q = mubar.values[j] / mu.values[j] - 1.0;
    acc += q * q * mu.values[j];
  }
  return mu.grid.h() * acc;
}

double log_density_ratio_sup(const DensityField& mubar, const DensityField& mu) {
  check_pair(mu, mubar);
  double best = 0.0;
  for (Eigen::Index j = 0; j < mu.values.size(); ++j) {
    best = std::max(best, std::abs(std::log(mubar.values[j] / mu.values[j])));
  }
  return best;
}

double lyapunov(const DensityField& mubar, const DensityField& mu, double r) {
  check_pair(mu, mubar);
  if (!(r > 1.0)) throw InvalidInput("lyapunov exponent r must exceed 1");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < mu.values.size(); ++j) {
    acc += std::pow(mubar.values[j] / mu.values[j], r) * mu.values[j];
  }
  return mu.grid.h() * acc / (r - 1.0);
}

}  // namespace varpro
