#pragma once

#include "varpro/config.hpp"
#include "varpro/io.hpp"
#include "varpro/metrics.hpp"
#include "varpro/teacher.hpp"
#include "varpro/ufd_pde.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace varpro {

/// One CSV row: run_id, iter, time, reduced_risk, full_risk, mmd_teacher, mmd_pde, chi2, clip_events.
struct MetricRow {
  std::string run_id;
  long iter = 0;
  double time = 0.0;
  double reduced_risk = 0.0;
  double full_risk = 0.0;
  double mmd_teacher = 0.0;
  double mmd_pde = 0.0;  ///< NaN when no PDE reference exists
  double chi2 = 0.0;     ///< chi^2(teacher | PDE state at this time); NaN without PDE
  double clip_events = 0.0;
};

inline constexpr const char* kMetricCsvHeader =
    "run_id,iter,time,reduced_risk,full_risk,mmd_teacher,mmd_pde,chi2,clip_events";

std::string metric_csv(const std::vector<MetricRow>& rows);
std::vector<MetricRow> parse_metric_csv(const std::string& text);

struct PointSpec {
  int index = 0;
  Algorithm algorithm = Algorithm::VarPro;
  Regularizer reg;
  double gamma = 100.0;
  double lambda = 1e-3;
  int M = 128;

  std::string label() const;
};

/// Cartesian product of the sweep lists.
std::vector<PointSpec> expand_points(const ExperimentConfig& cfg);

/// Seeds for one run. Teacher and data depend on (base, run) only, so every point
/// of a run sees the same teacher sample and dataset; the initial atoms depend on
/// (base, run, M) so algorithms compared at equal width start from the same atoms.
struct RunSeeds {
  std::uint64_t teacher = 0;
  std::uint64_t data = 0;
  std::uint64_t init = 0;
};

RunSeeds run_seeds(std::uint64_t base_seed, int run, int M);

/// PDE exponent and coefficient matching the lambda -> 0 limit of a regularizer:
/// r = 2 and C = 1/2 for the halved quadratics, C = 1 for Quad and PowerR.
double pde_exponent(const Regularizer& reg);
double pde_coefficient(const Regularizer& reg);

struct StateSnapshot {
  long k = 0;
  double t = 0.0;
  ParticleEnsemble state;
};

struct RunOutput {
  int run = 0;
  RunSeeds seeds;
  std::vector<MetricRow> rows;
  std::vector<StateSnapshot> states;
  double wall_seconds = 0.0;
  std::string error;  ///< empty on success

  bool ok() const { return error.empty(); }
};

struct PointResult {
  PointSpec point;
  TrainConfig train;
  std::vector<RunOutput> runs;
  std::vector<MetricRow> mean;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<PointResult> points;
  double wall_seconds = 0.0;

  bool all_ok() const;
};

using ProgressFn = std::function<void(const PointSpec&, const RunOutput&)>;

/// Runs every (point, run) pair on a worker pool. Per-run failures are recorded and
/// the sweep continues.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {});

/// Arithmetic mean over the successful runs, row by row.
std::vector<MetricRow> mean_rows(const std::vector<RunOutput>& runs);

/// Trapezoidal time average of a column over [t0, t1].
double time_average(const std::vector<MetricRow>& rows, double MetricRow::*column, double t0, double t1);

/// Writes per-run CSVs, mean CSVs, particle snapshots and manifest.json under `dir`.
/// Returns the manifest.
nlohmann::json write_experiment(const ExperimentResult& result, const std::filesystem::path& dir);

/// Teacher target density on the PDE grid and the PDE solution at `times`.
struct PdeReference {
  DensityField target;
  PdeSolution solution;
};

PdeReference solve_reference_pde(double gamma, const Regularizer& reg, const std::vector<double>& times,
                                 int cells, double rel_tol, double abs_tol, std::optional<double> coefficient = {});

struct PdeCommand {
  double gamma = 100.0;
  double r = 2.0;
  double C = 1.0;
  int cells = 512;
  std::vector<double> times{0.0, 0.5, 1.0, 2.0, 4.0};
  bool start_at_teacher = false;  ///< mu0 = mubar instead of uniform
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
};

/// Solves the PDE for a circle teacher and returns the snapshot table (header holds
/// grid, config and teacher).
PdeTable solve_pde_cmd(const PdeCommand& cmd);

struct CompareRow {
  double t_a = 0.0;
  double t_b = 0.0;
  double value = 0.0;
};

/// A time-indexed series of measures: a directory of particle snapshots or a PDE
/// table file.
struct MeasureSeries {
  std::vector<double> times;
  std::vector<WeightedAtoms> measures;
  double tau = 0.0;  ///< particle step size, 0 for PDE tables
};

MeasureSeries load_series(const std::filesystem::path& p);

/// Nearest-snapshot alignment with skew at most tau/2 (tau of the particle side;
/// exact match when both sides are PDE tables). Metric: "mmd", "mmd-chordal" or
/// "mmd-quotient".
std::vector<CompareRow> compare_series(const MeasureSeries& a, const MeasureSeries& b, const std::string& metric);

std::string compare_csv(const std::vector<CompareRow>& rows);

}  // namespace varpro
