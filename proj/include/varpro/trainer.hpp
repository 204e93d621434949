#pragma once

#include "varpro/features.hpp"
#include "varpro/outer_solver.hpp"
#include "varpro/rng.hpp"
#include "varpro/types.hpp"

#include <functional>
#include <optional>
#include <string_view>
#include <vector>

namespace varpro {

enum class Algorithm { VarPro, TwoTimescale, PlainGD };

std::string_view to_string(Algorithm a);
Algorithm algorithm_from_string(std::string_view name);

struct TrainConfig {
  int M = 128;
  long iters = 0;
  double tau = 0x1.0p-10;
  double lambda = 1e-3;
  Regularizer reg = Regularizer::biased();
  /// Outer-weight timescale; defaults to lambda * M when unset.
  std::optional<double> eta;
  std::uint64_t seed = 0;
  long eval_every = 1;
  Algorithm algorithm = Algorithm::VarPro;

  double effective_eta() const { return eta ? *eta : lambda * M; }
  void validate() const;
};

struct StepInfo {
  long clip_events = 0;
  /// Objective at the state the step started from: the reduced risk for VarPro,
  /// the full (lambda-scaled) risk for the other algorithms.
  double objective_before = 0.0;
};

struct TrajectoryRecord {
  long k = 0;
  double t = 0.0;  ///< k * tau
  double wallclock = 0.0;
  double reduced_risk = 0.0;
  /// Objective at the carried outer weights; equals reduced_risk for VarPro.
  double full_risk = 0.0;
  long clip_events = 0;  ///< cumulative
};

struct TrajectoryLog {
  std::vector<TrajectoryRecord> records;
};

struct RunResult {
  TrajectoryLog log;
  ParticleEnsemble final_state;
};

/// Called with the state at each logged iteration.
using Observer = std::function<void(const ParticleEnsemble&, const TrajectoryRecord&)>;

ParticleEnsemble init_uniform(int M, const Domain& domain, Rng& rng);

/// Reduced risk: minimum over u of the primal objective at the current atoms.
double reduced_risk(const FeatureModel& model, const ParticleEnsemble& state, const DataSet& data,
                    double lambda, const Regularizer& reg);

/// Primal objective at the carried outer weights.
double full_risk(const FeatureModel& model, const ParticleEnsemble& state, const DataSet& data,
                 double lambda, const Regularizer& reg);

/// g_i = (u_i / (lambda N)) sum_j r_j grad phi(omega_i, x_j) at the projected u.
/// Equals M times the omega_i-gradient of the reduced risk.
RowMatrix varpro_direction(const FeatureModel& model, const ParticleEnsemble& state, const DataSet& data,
                           double lambda, const Regularizer& reg, OuterSolution* solution = nullptr);

/// Sets state.outer to the minimizer of the risk at the current atoms.
ParticleEnsemble project_outer(const ParticleEnsemble& state, const FeatureModel& model, const DataSet& data,
                               double lambda, const Regularizer& reg);

ParticleEnsemble varpro_step(const ParticleEnsemble& state, const FeatureModel& model, const DataSet& data,
                             const TrainConfig& cfg, StepInfo* info = nullptr);

ParticleEnsemble two_timescale_step(const ParticleEnsemble& state, const FeatureModel& model,
                                    const DataSet& data, const TrainConfig& cfg, StepInfo* info = nullptr);

ParticleEnsemble plain_gd_step(const ParticleEnsemble& state, const FeatureModel& model, const DataSet& data,
                               const TrainConfig& cfg, StepInfo* info = nullptr);

/// Runs cfg.iters steps of cfg.algorithm. Atoms start from init_uniform with
/// Rng(cfg.seed) unless `initial` is given; the two outer-weight algorithms start
/// from one exact projection.
RunResult run(const TrainConfig& cfg, const FeatureModel& model, const DataSet& data,
              const Observer& observer = {}, std::optional<ParticleEnsemble> initial = std::nullopt);

}  // namespace varpro
