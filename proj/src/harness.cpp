#include "varpro/harness.hpp"

#include "varpro/io.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>
#include <numbers>

namespace varpro {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum StreamTag : std::uint64_t { kTeacherStream = 1, kDataStream = 2, kInitStream = 3 };

// Logged iterations: 0, every eval_every, and the last one.
std::vector<long> logged_iterations(long iters, long eval_every) {
  std::vector<long> ks;
  for (long k = 0; k < iters; k += eval_every) ks.push_back(k);
  ks.push_back(iters);
  return ks;
}

struct PdeEval {
  PdeReference ref;
  std::vector<EnergyMmdReference> mmd;
  std::map<long, std::size_t> index_of_k;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

TeacherSpec teacher_for(const ExperimentConfig& cfg, double gamma) {
  return cfg.torus ? TeacherSpec::torus_default(gamma, cfg.teacher_width)
                   : TeacherSpec::circle_default(gamma, cfg.teacher_width);
}

FeatureModel model_for(const ExperimentConfig& cfg) {
  return cfg.torus ? FeatureModel::laplace_torus() : FeatureModel::relu_sphere();
}

TrainConfig train_config_for(const ExperimentConfig& cfg, const PointSpec& p, std::uint64_t init_seed) {
  TrainConfig t;
  t.M = p.M;
  t.iters = cfg.iters;
  t.tau = cfg.tau;
  t.lambda = p.lambda;
  t.reg = p.reg;
  t.eta = cfg.eta;
  t.seed = init_seed;
  t.eval_every = cfg.eval_every;
  t.algorithm = p.algorithm;
  return t;
}

bool wants_state(const ExperimentConfig& cfg, long k) {
  if (cfg.keep_states) return true;
  if (cfg.snapshot_every <= 0) return false;
  return k % cfg.snapshot_every == 0 || k == cfg.iters;
}

RunOutput run_single(const ExperimentConfig& cfg, const PointSpec& point, int run, const PdeEval* pde) {
  RunOutput out;
  out.run = run;
  out.seeds = run_seeds(cfg.base_seed, run, point.M);
  const auto t0 = Clock::now();
  const std::string run_id = "p" + std::to_string(point.index) + "-r" + std::to_string(run);
  try {
    const TeacherSpec spec = teacher_for(cfg, point.gamma);
    Rng teacher_rng(out.seeds.teacher);
    const ParticleEnsemble teacher = sample_teacher(spec, teacher_rng);
    const FeatureModel model = model_for(cfg);
    Rng data_rng(out.seeds.data);
    const DataSet data = make_dataset(model, teacher, cfg.n_samples, data_rng);

    const EnergyDistance dist =
        cfg.mmd_distance.empty() ? default_energy_distance(spec.domain) : energy_distance_from_string(cfg.mmd_distance);
    const EnergyMmdReference to_teacher(WeightedAtoms::uniform(teacher), dist);

    const TrainConfig train = train_config_for(cfg, point, out.seeds.init);
    auto observer = [&](const ParticleEnsemble& state, const TrajectoryRecord& rec) {
      MetricRow row;
      row.run_id = run_id;
      row.iter = rec.k;
      row.time = rec.t;
      row.reduced_risk = rec.reduced_risk;
      row.full_risk = rec.full_risk;
      const WeightedAtoms atoms = WeightedAtoms::uniform(state);
      row.mmd_teacher = to_teacher(atoms);
      row.mmd_pde = kNaN;
      row.chi2 = kNaN;
      if (pde) {
        const std::size_t i = pde->index_of_k.at(rec.k);
        row.mmd_pde = pde->mmd[i](atoms);
        row.chi2 = chi2_on_grid(pde->ref.target, pde->ref.solution.snapshots[i]);
      }
      row.clip_events = static_cast<double>(rec.clip_events);
      out.rows.push_back(std::move(row));
      if (wants_state(cfg, rec.k)) out.states.push_back(StateSnapshot{rec.k, rec.t, state});
    };
    varpro::run(train, model, data, observer);
  } catch (const std::exception& e) {
    out.error = e.what();
    if (out.error.empty()) out.error = "unknown error";
  }
  out.wall_seconds = seconds_since(t0);
  return out;
}

nlohmann::json config_json(const ExperimentConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : parse_key_values(to_text(cfg))) j[k] = v;
  return j;
}

}  // namespace

std::string metric_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  os << kMetricCsvHeader << "\n";
  for (const auto& r : rows) {
    os << r.run_id << "," << r.iter << "," << format_double(r.time) << "," << format_double(r.reduced_risk) << ","
       << format_double(r.full_risk) << "," << format_double(r.mmd_teacher) << "," << format_double(r.mmd_pde) << ","
       << format_double(r.chi2) << "," << format_double(r.clip_events) << "\n";
  }
  return os.str();
}

std::vector<MetricRow> parse_metric_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kMetricCsvHeader) throw InvalidInput("unexpected metric CSV header");
  std::vector<MetricRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> c;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) c.push_back(cell);
    if (c.size() != 9) throw InvalidInput("metric CSV row must have 9 columns");
    MetricRow r;
    r.run_id = c[0];
    r.iter = std::stol(c[1]);
    r.time = parse_csv_double(c[2]);
    r.reduced_risk = parse_csv_double(c[3]);
    r.full_risk = parse_csv_double(c[4]);
    r.mmd_teacher = parse_csv_double(c[5]);
    r.mmd_pde = parse_csv_double(c[6]);
    r.chi2 = parse_csv_double(c[7]);
    r.clip_events = parse_csv_double(c[8]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string PointSpec::label() const {
  std::ostringstream os;
  os << "p" << index << "_" << to_string(algorithm) << "_" << to_string(reg) << "_g" << format_double(gamma) << "_l"
     << format_double(lambda) << "_M" << M;
  std::string s = os.str();
  std::replace(s.begin(), s.end(), ':', '-');
  return s;
}

std::vector<PointSpec> expand_points(const ExperimentConfig& cfg) {
  std::vector<PointSpec> out;
  for (Algorithm a : cfg.algorithms)
    for (const Regularizer& r : cfg.regs)
      for (double g : cfg.gammas)
        for (double l : cfg.lambdas)
          for (int m : cfg.widths) {
            PointSpec p;
            p.index = static_cast<int>(out.size());
            p.algorithm = a;
            p.reg = r;
            p.gamma = g;
            p.lambda = l;
            p.M = m;
            out.push_back(p);
          }
  return out;
}

RunSeeds run_seeds(std::uint64_t base_seed, int run, int M) {
  const auto r = static_cast<std::uint64_t>(run);
  return RunSeeds{Rng::substream(base_seed, {r, kTeacherStream}).key(),
                  Rng::substream(base_seed, {r, kDataStream}).key(),
                  Rng::substream(base_seed, {r, kInitStream, static_cast<std::uint64_t>(M)}).key()};
}

double pde_exponent(const Regularizer& reg) { return reg.kind == RegKind::PowerR ? reg.r : 2.0; }

double pde_coefficient(const Regularizer& reg) {
  return reg.kind == RegKind::QuadBiased || reg.kind == RegKind::QuadUnbiased ? 0.5 : 1.0;
}

bool ExperimentResult::all_ok() const {
  for (const auto& p : points)
    for (const auto& r : p.runs)
      if (!r.ok()) return false;
  return true;
}

PdeReference solve_reference_pde(double gamma, const Regularizer& reg, const std::vector<double>& times, int cells,
                                  double rel_tol, double abs_tol, std::optional<double> coefficient) {
  const Grid1D grid{cells};
  PdeReference ref;
  ref.target = grid_teacher_density(TeacherSpec::circle_default(gamma), grid);
  PdeConfig pc;
  pc.r = pde_exponent(reg);
  pc.C = coefficient ? *coefficient : pde_coefficient(reg);
  pc.snapshot_times = times;
  pc.rel_tol = rel_tol;
  pc.abs_tol = abs_tol;
  ref.solution = step_to(DensityField::uniform(grid), ref.target, pc);
  return ref;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const auto t0 = Clock::now();
  ExperimentResult result;
  result.config = cfg;

  const std::vector<PointSpec> points = expand_points(cfg);
  const std::vector<long> ks = logged_iterations(cfg.iters, cfg.eval_every);
  std::vector<double> times;
  for (long k : ks) times.push_back(static_cast<double>(k) * cfg.tau);

  // PDE references are shared by every run of the points that need them.
  std::map<std::tuple<double, double, double>, std::shared_ptr<PdeEval>> pde_cache;
  std::vector<std::shared_ptr<PdeEval>> pde_for(points.size());
  std::vector<std::string> pde_error(points.size());
  const bool pde_enabled = cfg.with_pde && !cfg.torus;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const PointSpec& p = points[i];
    if (!pde_enabled || std::isinf(p.gamma)) continue;
    const double C = cfg.pde_coefficient ? *cfg.pde_coefficient : pde_coefficient(p.reg);
    const auto key = std::make_tuple(p.gamma, pde_exponent(p.reg), C);
    auto it = pde_cache.find(key);
    if (it == pde_cache.end()) {
      std::shared_ptr<PdeEval> eval;
      try {
        eval = std::make_shared<PdeEval>();
        eval->ref = solve_reference_pde(p.gamma, p.reg, times, cfg.pde_cells, cfg.pde_rel_tol, cfg.pde_abs_tol, C);
        const EnergyDistance dist = cfg.mmd_distance.empty() ? EnergyDistance::Chordal
                                                             : energy_distance_from_string(cfg.mmd_distance);
        for (const auto& f : eval->ref.solution.snapshots) eval->mmd.emplace_back(grid_as_atoms(f), dist);
        for (std::size_t s = 0; s < ks.size(); ++s) eval->index_of_k[ks[s]] = s;
      } catch (const std::exception& e) {
        eval.reset();
        pde_error[i] = std::string("reference PDE failed: ") + e.what();
      }
      it = pde_cache.emplace(key, eval).first;
    }
    pde_for[i] = it->second;
    if (!it->second && pde_error[i].empty()) pde_error[i] = "reference PDE failed";
  }

  result.points.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    result.points[i].point = points[i];
    result.points[i].train = train_config_for(cfg, points[i], 0);
    result.points[i].runs.resize(static_cast<std::size_t>(cfg.n_runs));
  }

  const std::size_t n_tasks = points.size() * static_cast<std::size_t>(cfg.n_runs);
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  auto worker = [&]() {
    for (std::size_t task = next++; task < n_tasks; task = next++) {
      const std::size_t pi = task / static_cast<std::size_t>(cfg.n_runs);
      const int run = static_cast<int>(task % static_cast<std::size_t>(cfg.n_runs));
      RunOutput out;
      if (!pde_error[pi].empty()) {
        out.run = run;
        out.seeds = run_seeds(cfg.base_seed, run, points[pi].M);
        out.error = pde_error[pi];
      } else {
        out = run_single(cfg, points[pi], run, pde_for[pi].get());
      }
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(points[pi], out);
      }
      result.points[pi].runs[static_cast<std::size_t>(run)] = std::move(out);
    }
  };
  unsigned n_workers = cfg.workers > 0 ? static_cast<unsigned>(cfg.workers) : std::thread::hardware_concurrency();
  n_workers = std::max(1u, std::min<unsigned>(n_workers, static_cast<unsigned>(n_tasks)));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (auto& p : result.points) p.mean = mean_rows(p.runs);
  result.wall_seconds = seconds_since(t0);
  return result;
}

std::vector<MetricRow> mean_rows(const std::vector<RunOutput>& runs) {
  std::vector<const RunOutput*> ok;
  for (const auto& r : runs)
    if (r.ok()) ok.push_back(&r);
  if (ok.empty()) return {};
  const std::size_t n_rows = ok.front()->rows.size();
  for (const auto* r : ok) {
    if (r->rows.size() != n_rows) throw InvalidInput("runs have different numbers of logged rows");
  }
  const double n = static_cast<double>(ok.size());
  std::vector<MetricRow> mean(n_rows);
  for (std::size_t i = 0; i < n_rows; ++i) {
    MetricRow& m = mean[i];
    m.run_id = "mean";
    m.iter = ok.front()->rows[i].iter;
    m.time = ok.front()->rows[i].time;
    for (double MetricRow::*col : {&MetricRow::reduced_risk, &MetricRow::full_risk, &MetricRow::mmd_teacher,
                                   &MetricRow::mmd_pde, &MetricRow::chi2, &MetricRow::clip_events}) {
      double acc = 0.0;
      for (const auto* r : ok) acc += r->rows[i].*col;
      m.*col = acc / n;
    }
  }
  return mean;
}

double time_average(const std::vector<MetricRow>& rows, double MetricRow::*column, double t0, double t1) {
  const double eps = 1e-12 * std::max(1.0, std::abs(t1));
  std::vector<const MetricRow*> in;
  for (const auto& r : rows)
    if (r.time >= t0 - eps && r.time <= t1 + eps) in.push_back(&r);
  if (in.empty()) throw InvalidInput("no rows in the averaging window");
  if (in.size() == 1) return in.front()->*column;
  double acc = 0.0;
  for (std::size_t i = 1; i < in.size(); ++i) {
    acc += 0.5 * (in[i]->*column + in[i - 1]->*column) * (in[i]->time - in[i - 1]->time);
  }
  return acc / (in.back()->time - in.front()->time);
}

nlohmann::json write_experiment(const ExperimentResult& result, const std::filesystem::path& dir) {
  const ExperimentConfig& cfg = result.config;
  nlohmann::json manifest;
  const std::string cfg_text = to_text(cfg);
  manifest["config"] = config_json(cfg);
  manifest["config_text"] = cfg_text;
  manifest["config_hash"] = write_file(dir / "config.txt", cfg_text);
  manifest["base_seed"] = cfg.base_seed;
  manifest["wall_seconds"] = result.wall_seconds;
  manifest["all_ok"] = result.all_ok();
  nlohmann::json failures = nlohmann::json::array();
  nlohmann::json pts = nlohmann::json::array();

  for (const auto& pr : result.points) {
    const PointSpec& p = pr.point;
    const std::string label = p.label();
    nlohmann::json pj;
    pj["index"] = p.index;
    pj["label"] = label;
    pj["algorithm"] = std::string(to_string(p.algorithm));
    pj["reg"] = to_string(p.reg);
    pj["gamma"] = format_double(p.gamma);
    pj["lambda"] = p.lambda;
    pj["M"] = p.M;
    pj["eta"] = TrainConfig{.M = p.M, .lambda = p.lambda, .eta = cfg.eta}.effective_eta();
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : pr.runs) {
      nlohmann::json rj;
      rj["run"] = r.run;
      rj["seeds"] = {{"teacher", r.seeds.teacher}, {"data", r.seeds.data}, {"init", r.seeds.init}};
      rj["wall_seconds"] = r.wall_seconds;
      rj["ok"] = r.ok();
      if (!r.ok()) {
        rj["error"] = r.error;
        failures.push_back({{"point", label}, {"run", r.run}, {"error", r.error}});
      } else {
        const std::string rel = label + "/run_" + std::to_string(r.run) + ".csv";
        rj["csv"] = rel;
        rj["csv_hash"] = write_file(dir / rel, metric_csv(r.rows));
        const std::string cfg_hash =
            git_blob_hash(cfg_text + "point = " + label + "\nrun = " + std::to_string(r.run) + "\n");
        nlohmann::json snaps = nlohmann::json::array();
        if (cfg.snapshot_every > 0) {
          for (const auto& s : r.states) {
            if (s.k % cfg.snapshot_every != 0 && s.k != cfg.iters) continue;
            ParticleSnapshot snap;
            snap.header = {{"k", s.k}, {"t", s.t}, {"tau", cfg.tau}, {"cfg_hash", cfg_hash}};
            snap.state = s.state;
            const std::string srel = label + "/run_" + std::to_string(r.run) + "/snap_" + std::to_string(s.k) + ".csv";
            snaps.push_back({{"k", s.k}, {"path", srel}, {"hash", write_file(dir / srel, particle_snapshot_csv(snap))}});
          }
        }
        rj["snapshots"] = snaps;
      }
      runs.push_back(rj);
    }
    pj["runs"] = runs;
    if (!pr.mean.empty()) {
      const std::string rel = label + "/mean.csv";
      pj["mean_csv"] = rel;
      pj["mean_hash"] = write_file(dir / rel, metric_csv(pr.mean));
    }
    pts.push_back(pj);
  }

  // PDE reference tables at the snapshot times, one per distinct PDE.
  if (cfg.snapshot_every > 0 && cfg.with_pde && !cfg.torus) {
    std::vector<double> times;
    for (long k = 0; k <= cfg.iters; ++k) {
      if (k % cfg.snapshot_every == 0 || k == cfg.iters) times.push_back(static_cast<double>(k) * cfg.tau);
    }
    nlohmann::json tables = nlohmann::json::array();
    std::map<std::string, bool> done;
    for (const auto& pr : result.points) {
      const PointSpec& p = pr.point;
      if (std::isinf(p.gamma)) continue;
      const double C = cfg.pde_coefficient ? *cfg.pde_coefficient : pde_coefficient(p.reg);
      const std::string name = "pde_g" + format_double(p.gamma) + "_r" + format_double(pde_exponent(p.reg)) + "_C" +
                               format_double(C) + ".csv";
      if (done[name]) continue;
      done[name] = true;
      PdeCommand cmd;
      cmd.gamma = p.gamma;
      cmd.r = pde_exponent(p.reg);
      cmd.C = C;
      cmd.cells = cfg.pde_cells;
      cmd.times = times;
      cmd.rel_tol = cfg.pde_rel_tol;
      cmd.abs_tol = cfg.pde_abs_tol;
      try {
        tables.push_back({{"path", name}, {"hash", write_file(dir / name, pde_table_csv(solve_pde_cmd(cmd)))}});
      } catch (const std::exception& e) {
        failures.push_back({{"pde", name}, {"error", e.what()}});
      }
    }
    manifest["pde_tables"] = tables;
  }

  manifest["points"] = pts;
  manifest["failures"] = failures;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

PdeTable solve_pde_cmd(const PdeCommand& cmd) {
  if (std::isinf(cmd.gamma)) throw InvalidInput("an atomic teacher has no density to diffuse towards");
  const Grid1D grid{cmd.cells};
  grid.validate();
  const TeacherSpec spec = TeacherSpec::circle_default(cmd.gamma);
  const DensityField target = grid_teacher_density(spec, grid);
  PdeConfig pc;
  pc.r = cmd.r;
  pc.C = cmd.C;
  pc.snapshot_times = cmd.times;
  pc.rel_tol = cmd.rel_tol;
  pc.abs_tol = cmd.abs_tol;
  const DensityField mu0 = cmd.start_at_teacher ? target : DensityField::uniform(grid);
  const PdeSolution sol = step_to(mu0, target, pc);

  PdeTable table;
  table.times = sol.times;
  table.fields = sol.snapshots;
  table.header = {{"grid", {{"n_cells", grid.n_cells}, {"h", grid.h()}}},
                  {"cfg",
                   {{"r", cmd.r},
                    {"C", cmd.C},
                    {"rel_tol", cmd.rel_tol},
                    {"abs_tol", cmd.abs_tol},
                    {"mu0", cmd.start_at_teacher ? "teacher" : "uniform"}}},
                  {"teacher", {{"gamma", cmd.gamma}, {"modes", {0.0, 0.4 * std::numbers::pi}}, {"weights", {2.0 / 3.0, 1.0 / 3.0}}}},
                  {"stats",
                   {{"accepted", sol.stats.accepted},
                    {"rejected", sol.stats.rejected},
                    {"floor_events", sol.stats.floor_events}}}};
  return table;
}

MeasureSeries load_series(const std::filesystem::path& p) {
  MeasureSeries s;
  if (std::filesystem::is_directory(p)) {
    std::vector<std::pair<double, WeightedAtoms>> items;
    for (const auto& entry : std::filesystem::directory_iterator(p)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("snap_", 0) != 0 || entry.path().extension() != ".csv") continue;
      const ParticleSnapshot snap = parse_particle_snapshot(read_file(entry.path()));
      s.tau = snap.header.value("tau", 0.0);
      items.emplace_back(snap.header.value("t", 0.0), WeightedAtoms::uniform(snap.state));
    }
    if (items.empty()) throw InvalidInput("no snap_*.csv files in " + p.string());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [t, m] : items) {
      s.times.push_back(t);
      s.measures.push_back(std::move(m));
    }
    return s;
  }
  const PdeTable table = parse_pde_table(read_file(p));
  for (std::size_t i = 0; i < table.times.size(); ++i) {
    s.times.push_back(table.times[i]);
    s.measures.push_back(grid_as_atoms(table.fields[i]));
  }
  return s;
}

std::vector<CompareRow> compare_series(const MeasureSeries& a, const MeasureSeries& b, const std::string& metric) {
  if (a.times.empty() || b.times.empty()) throw InvalidInput("cannot compare an empty series");
  const double skew = std::max(a.tau, b.tau) > 0.0 ? 0.5 * std::max(a.tau, b.tau) : 1e-12;
  std::vector<CompareRow> rows;
  for (std::size_t i = 0; i < a.times.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < b.times.size(); ++j) {
      if (std::abs(b.times[j] - a.times[i]) < std::abs(b.times[best] - a.times[i])) best = j;
    }
    if (std::abs(b.times[best] - a.times[i]) > skew * (1.0 + 1e-9)) continue;
    const WeightedAtoms& ma = a.measures[i];
    const WeightedAtoms& mb = b.measures[best];
    EnergyDistance dist;
    if (metric == "mmd") dist = default_energy_distance(ma.domain);
    else if (metric == "mmd-chordal") dist = EnergyDistance::Chordal;
    else if (metric == "mmd-quotient") dist = EnergyDistance::Quotient;
    else throw InvalidInput("unknown comparison metric: " + metric);
    rows.push_back(CompareRow{a.times[i], b.times[best], mmd_energy(ma, mb, dist)});
  }
  if (rows.empty()) throw InvalidInput("the two series have no overlapping time range");
  return rows;
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::ostringstream os;
  os << "t_a,t_b,value\n";
  for (const auto& r : rows) os << format_double(r.t_a) << "," << format_double(r.t_b) << "," << format_double(r.value) << "\n";
  return os.str();
}

}  // namespace varpro
