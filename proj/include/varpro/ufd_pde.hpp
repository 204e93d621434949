#pragma once

#include "varpro/density.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <stdexcept>
#include <vector>

namespace varpro {

/// Weighted ultra-fast diffusion  d_t mu = -C d_w( mu d_w (mubar/mu)^r )  on the circle.
struct PdeConfig {
  double r = 2.0;
  double C = 1.0;
  std::vector<double> snapshot_times;  ///< nondecreasing, >= 0; the last one is t_end
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double positivity_floor = 1e-12;
  double initial_step = 1e-6;
  long max_steps = 10'000'000;

  double t_end() const { return snapshot_times.empty() ? 0.0 : snapshot_times.back(); }
  void validate() const;
};

class PdeError : public std::runtime_error {
 public:
  PdeError(const std::string& what, double t, double h) : std::runtime_error(what), t_(t), h_(h) {}
  double time() const { return t_; }
  double step() const { return h_; }

 private:
  double t_;
  double h_;
};

struct PdeStats {
  long accepted = 0;
  long rejected = 0;
  long newton_failures = 0;
  long floor_events = 0;
};

struct PdeSolution {
  std::vector<double> times;
  std::vector<DensityField> snapshots;
  PdeStats stats;
};

/// Finite-volume right-hand side with arithmetic face densities:
///   g_j = (mubar_j / mu_j)^r,  F_{j+1/2} = C (mu_j + mu_{j+1})/2 (g_{j+1} - g_j) / h,
///   rhs_j = -(F_{j+1/2} - F_{j-1/2}) / h.
Eigen::VectorXd pde_rhs(const Eigen::VectorXd& mu, const Eigen::VectorXd& mubar, double h, double r, double C);
Eigen::VectorXd pde_rhs(const DensityField& mu, const DensityField& mubar, const PdeConfig& cfg);

/// Exact Jacobian of pde_rhs: periodic tridiagonal.
Eigen::SparseMatrix<double> pde_jacobian(const Eigen::VectorXd& mu, const Eigen::VectorXd& mubar, double h,
                                         double r, double C);

/// Adaptive TR-BDF2 integration. Steps land exactly on each snapshot time; every
/// accepted state is floored at positivity_floor and renormalized to unit mass.
PdeSolution step_to(const DensityField& mu0, const DensityField& mubar, const PdeConfig& cfg);

/// h sum_j (mubar_j/mu_j - 1)^2 mu_j
double chi2_on_grid(const DensityField& mubar, const DensityField& mu);

/// max_j |log(mubar_j / mu_j)|
double log_density_ratio_sup(const DensityField& mubar, const DensityField& mu);

/// (1/(r-1)) h sum_j (mubar_j/mu_j)^r mu_j
double lyapunov(const DensityField& mubar, const DensityField& mu, double r);

}  // namespace varpro
