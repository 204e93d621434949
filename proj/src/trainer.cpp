#include "varpro/trainer.hpp"

#include <chrono>
#include <cmath>

namespace varpro {

namespace {

void check_outer(const ParticleEnsemble& state) {
  if (!state.outer) throw InvalidInput("this algorithm needs outer weights on the state");
  if (state.outer->size() != state.size()) throw InvalidInput("outer weight length does not match the atoms");
}

// Applies omega_i <- retract(omega_i, -scale_i * g_i), clipping each axis of the
// step at a quarter period.
ParticleEnsemble move_atoms(const ParticleEnsemble& state, const RowMatrix& g, const Eigen::VectorXd& scale,
                            long* clip_events) {
  const Domain& d = state.domain;
  const double cap = 0.25 * d.period;
  ParticleEnsemble next = state;
  long clipped = 0;
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    Coords step(d.dim);
    bool hit = false;
    for (int k = 0; k < d.dim; ++k) {
      double s = -scale[i] * g(i, k);
      if (std::abs(s) > cap) {
        s = std::copysign(cap, s);
        hit = true;
      }
      step[k] = s;
    }
    clipped += hit;
    next.atoms[i] = retract(state.atoms[i], step, d);
  }
  if (clip_events) *clip_events = clipped;
  ++next.iteration;
  return next;
}

}  // namespace

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::VarPro: return "varpro";
    case Algorithm::TwoTimescale: return "two-timescale";
    case Algorithm::PlainGD: return "plain-gd";
  }
  return "?";
}

Algorithm algorithm_from_string(std::string_view name) {
  if (name == "varpro") return Algorithm::VarPro;
  if (name == "two-timescale" || name == "2ts") return Algorithm::TwoTimescale;
  if (name == "plain-gd" || name == "gd") return Algorithm::PlainGD;
  throw InvalidInput("unknown algorithm: " + std::string(name));
}

void TrainConfig::validate() const {
  if (M < 1) throw InvalidInput("M must be positive");
  if (iters < 0) throw InvalidInput("iters must be nonnegative");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidInput("tau must be positive");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidInput("lambda must be positive");
  if (eval_every < 1) throw InvalidInput("eval_every must be positive");
  reg.validate();
  if (algorithm != Algorithm::VarPro) {
    const double e = effective_eta();
    if (!(e >= 0.0) || !std::isfinite(e)) throw InvalidInput("eta must be finite and nonnegative");
    if (algorithm == Algorithm::TwoTimescale && !(e > 0.0)) throw InvalidInput("two-timescale needs eta > 0");
  }
}

ParticleEnsemble init_uniform(int M, const Domain& domain, Rng& rng) {
  if (M < 1) throw InvalidInput("M must be positive");
  domain.validate();
  ParticleEnsemble e;
  e.domain = domain;
  e.atoms.reserve(static_cast<std::size_t>(M));
  for (int i = 0; i < M; ++i) {
    Coords c(domain.dim);
    for (int k = 0; k < domain.dim; ++k) c[k] = rng.uniform() * domain.period;
    e.atoms.push_back(canonicalize(c, domain));
  }
  return e;
}

double reduced_risk(const FeatureModel& model, const ParticleEnsemble& state, const DataSet& data,
                    double lambda, const Regularizer& reg) {
  const FeatureMatrix phi = assemble_matrix(model, state, data);
  return solve_outer(phi, data.ys, lambda, reg).primal_value;
}

double full_risk(const FeatureModel& model, const ParticleEnsemble& state, const DataSet& data, double lambda,
                 const Regularizer& reg) {
  check_outer(state);
  const FeatureMatrix phi = assemble_matrix(model, state, data);
  return primal_value(phi, data.ys, lambda, reg, *state.outer);
}

RowMatrix varpro_direction(const FeatureModel& model, const ParticleEnsemble& state, const DataSet& data,
                           double lambda, const Regularizer& reg, OuterSolution* solution) {
  const FeatureMatrix phi = assemble_matrix(model, state, data);
  OuterSolution sol = solve_outer(phi, data.ys, lambda, reg);
  RowMatrix g = weighted_gradient_sums(model, state, data, sol.residual);
  const double n = static_cast<double>(data.size());
  for (Eigen::Index i = 0; i < g.rows(); ++i) g.row(i) *= sol.u[i] / (lambda * n);
  if (solution) *solution = std::move(sol);
  return g;
}

ParticleEnsemble project_outer(const ParticleEnsemble& state, const FeatureModel& model, const DataSet& data,
                               double lambda, const Regularizer& reg) {
  const FeatureMatrix phi = assemble_matrix(model, state, data);
  ParticleEnsemble out = state;
  out.outer = solve_outer(phi, data.ys, lambda, reg).u;
  return out;
}

ParticleEnsemble varpro_step(const ParticleEnsemble& state, const FeatureModel& model, const DataSet& data,
                             const TrainConfig& cfg, StepInfo* info) {
  if (cfg.algorithm != Algorithm::VarPro) throw InvalidInput("varpro_step needs the VarPro algorithm");
  OuterSolution sol;
  const RowMatrix g = varpro_direction(model, state, data, cfg.lambda, cfg.reg, &sol);
  long clipped = 0;
  ParticleEnsemble next =
      move_atoms(state, g, Eigen::VectorXd::Constant(state.size(), cfg.tau), &clipped);
  next.outer.reset();
  if (info) *info = StepInfo{clipped, sol.primal_value};
  return next;
}

ParticleEnsemble two_timescale_step(const ParticleEnsemble& state, const FeatureModel& model,
                                    const DataSet& data, const TrainConfig& cfg, StepInfo* info) {
  if (cfg.algorithm != Algorithm::TwoTimescale) throw InvalidInput("two_timescale_step needs TwoTimescale");
  check_outer(state);
  const Eigen::VectorXd& u = *state.outer;
  const FeatureMatrix phi = assemble_matrix(model, state, data);
  const double n = static_cast<double>(data.size());
  const double m = static_cast<double>(state.size());
  const double lambda = cfg.lambda;

  const Eigen::VectorXd r = phi * u / m - data.ys;
  const RowMatrix g = weighted_gradient_sums(model, state, data, r);
  const Eigen::VectorXd phit_r = phi.transpose() * r;

  long clipped = 0;
  ParticleEnsemble next = move_atoms(state, g, cfg.tau * u / (lambda * n), &clipped);

  const double eta = cfg.effective_eta();
  Eigen::VectorXd u_next(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double bracket = phit_r[i] / (lambda * n) + cfg.reg.derivative(u[i]);
    u_next[i] = u[i] - eta / m * bracket;
  }
  next.outer = std::move(u_next);
  if (info) *info = StepInfo{clipped, primal_value(phi, data.ys, lambda, cfg.reg, u)};
  return next;
}

ParticleEnsemble plain_gd_step(const ParticleEnsemble& state, const FeatureModel& model, const DataSet& data,
                               const TrainConfig& cfg, StepInfo* info) {
  if (cfg.algorithm != Algorithm::PlainGD) throw InvalidInput("plain_gd_step needs PlainGD");
  check_outer(state);
  const Eigen::VectorXd& u = *state.outer;
  const FeatureMatrix phi = assemble_matrix(model, state, data);
  const double n = static_cast<double>(data.size());
  const double m = static_cast<double>(state.size());
  const double lambda = cfg.lambda;

  const Eigen::VectorXd r = phi * u / m - data.ys;
  const RowMatrix g = weighted_gradient_sums(model, state, data, r);
  const Eigen::VectorXd phit_r = phi.transpose() * r;

  long clipped = 0;
  ParticleEnsemble next = move_atoms(state, g, cfg.tau * u / n, &clipped);

  const double step = cfg.effective_eta() * cfg.tau;
  Eigen::VectorXd u_next(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    u_next[i] = u[i] - step * (phit_r[i] / n + lambda * cfg.reg.derivative(u[i]));
  }
  next.outer = std::move(u_next);
  if (info) *info = StepInfo{clipped, primal_value(phi, data.ys, lambda, cfg.reg, u)};
  return next;
}

RunResult run(const TrainConfig& cfg, const FeatureModel& model, const DataSet& data, const Observer& observer,
              std::optional<ParticleEnsemble> initial) {
  cfg.validate();
  model.validate();

  ParticleEnsemble state;
  if (initial) {
    state = std::move(*initial);
    if (state.size() != cfg.M) throw InvalidInput("initial ensemble size does not match M");
  } else {
    Rng rng(cfg.seed);
    state = init_uniform(cfg.M, model.domain, rng);
  }
  if (cfg.algorithm != Algorithm::VarPro && !state.outer) {
    state = project_outer(state, model, data, cfg.lambda, cfg.reg);
  }

  const auto start = std::chrono::steady_clock::now();
  RunResult result;
  long total_clips = 0;

  auto log = [&](long k, double objective) {
    TrajectoryRecord rec;
    rec.k = k;
    rec.t = static_cast<double>(k) * cfg.tau;
    rec.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (cfg.algorithm == Algorithm::VarPro) {
      rec.reduced_risk = objective;
      rec.full_risk = objective;
    } else {
      rec.reduced_risk = reduced_risk(model, state, data, cfg.lambda, cfg.reg);
      rec.full_risk = objective;
    }
    rec.clip_events = total_clips;
    result.log.records.push_back(rec);
    if (observer) observer(state, rec);
  };

  auto objective_now = [&]() {
    return cfg.algorithm == Algorithm::VarPro ? reduced_risk(model, state, data, cfg.lambda, cfg.reg)
                                              : full_risk(model, state, data, cfg.lambda, cfg.reg);
  };

  for (long k = 0; k < cfg.iters; ++k) {
    StepInfo info;
    ParticleEnsemble next;
    switch (cfg.algorithm) {
      case Algorithm::VarPro: next = varpro_step(state, model, data, cfg, &info); break;
      case Algorithm::TwoTimescale: next = two_timescale_step(state, model, data, cfg, &info); break;
      case Algorithm::PlainGD: next = plain_gd_step(state, model, data, cfg, &info); break;
    }
    // The step already evaluated the objective at the pre-step state.
    if (k % cfg.eval_every == 0) log(k, info.objective_before);
    total_clips += info.clip_events;
    state = std::move(next);
  }
  log(cfg.iters, objective_now());

  result.final_state = std::move(state);
  return result;
}

}  // namespace varpro
