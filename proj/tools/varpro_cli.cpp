// Command-line front end: train, sweep, solve-pde, compare, sample-teacher.

#include "varpro/harness.hpp"
#include "varpro/io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace varpro;

namespace {

// Every ExperimentConfig key is also a flag (--iters 512, --regs biased,unbiased).
struct ConfigFlags {
  std::string config_file;
  std::string preset;
  bool full = false;
  std::vector<std::string> sets;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key = value config file");
    app->add_option("--preset", preset, "preset name");
    app->add_flag("--full", full, "full-scale preset instead of the mini variant");
    app->add_option("--set", sets, "extra key=value override (repeatable)");
    for (const auto& [key, value] : parse_key_values(to_text(ExperimentConfig{}))) {
      if (key == "preset" || key == "mini") continue;
      app->add_option("--" + key, values[key], "override '" + key + "'");
    }
  }

  ExperimentConfig build(ExperimentConfig defaults) const {
    std::vector<std::pair<std::string, std::string>> kv;
    if (!config_file.empty()) kv = parse_key_values(read_file(config_file));
    Preset p = defaults.preset;
    bool mini = defaults.mini;
    bool preset_given = false;
    for (const auto& [k, v] : kv) {
      if (k == "preset") p = preset_from_string(v), preset_given = true;
      if (k == "mini") mini = v == "true" || v == "1" || v == "yes";
    }
    if (!preset.empty()) p = preset_from_string(preset), preset_given = true;
    if (full) mini = false;
    ExperimentConfig cfg = preset_given || !mini ? preset_config(p, mini) : defaults;
    apply_overrides(cfg, kv);
    std::vector<std::pair<std::string, std::string>> flags;
    for (const auto& [k, v] : values)
      if (!v.empty()) flags.emplace_back(k, v);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw InvalidInput("--set expects key=value, got " + s);
      flags.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    apply_overrides(cfg, flags);
    cfg.validate();
    return cfg;
  }
};

int run_and_write(const ExperimentConfig& cfg) {
  auto progress = [](const PointSpec& p, const RunOutput& r) {
    std::fprintf(stderr, "[%s run %d] %s (%.1fs)\n", p.label().c_str(), r.run, r.ok() ? "ok" : r.error.c_str(),
                 r.wall_seconds);
  };
  const ExperimentResult result = run_experiment(cfg, progress);
  write_experiment(result, cfg.output);
  std::fprintf(stderr, "wrote %s (%.1fs)\n", cfg.output.c_str(), result.wall_seconds);
  return result.all_ok() ? 0 : 1;
}

std::vector<double> parse_times(const std::string& s) {
  std::vector<double> out;
  std::string cell;
  std::istringstream is(s);
  while (std::getline(is, cell, ',')) out.push_back(parse_csv_double(cell));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VarPro training of mean-field networks and the weighted ultra-fast diffusion"};
  app.require_subcommand(1);

  ConfigFlags train_flags;
  auto* train = app.add_subcommand("train", "train a single configuration (defaults: M=128, f_b, one run)");
  train_flags.attach(train);

  ConfigFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "run a preset sweep");
  sweep_flags.attach(sweep);

  PdeCommand pde;
  std::string pde_times = "0,0.5,1,2,4";
  std::string pde_out = "pde.csv";
  auto* solve = app.add_subcommand("solve-pde", "solve the weighted ultra-fast diffusion towards a circle teacher");
  solve->add_option("--gamma", pde.gamma, "teacher concentration");
  solve->add_option("--r", pde.r, "exponent r > 1");
  solve->add_option("--C", pde.C, "coefficient");
  solve->add_option("--cells", pde.cells, "grid cells (power of two)");
  solve->add_option("--times", pde_times, "comma-separated snapshot times");
  solve->add_flag("--from-teacher", pde.start_at_teacher, "start at the teacher density");
  solve->add_option("--rel-tol", pde.rel_tol);
  solve->add_option("--abs-tol", pde.abs_tol);
  solve->add_option("--output", pde_out, "output CSV");

  std::string cmp_a, cmp_b, cmp_metric = "mmd", cmp_out = "compare.csv";
  auto* compare = app.add_subcommand("compare", "compare two snapshot series (snapshot directory or PDE CSV)");
  compare->add_option("a", cmp_a)->required();
  compare->add_option("b", cmp_b)->required();
  compare->add_option("--metric", cmp_metric, "mmd | mmd-chordal | mmd-quotient");
  compare->add_option("--output", cmp_out, "output CSV");

  double st_gamma = 100.0;
  int st_width = 1024;
  bool st_torus = false;
  std::uint64_t st_seed = 20240601;
  std::string st_out = "teacher.csv";
  auto* sample = app.add_subcommand("sample-teacher", "sample teacher atoms");
  sample->add_option("--gamma", st_gamma, "concentration (inf for atoms)");
  sample->add_option("--width", st_width, "number of atoms");
  sample->add_flag("--torus", st_torus, "two-mode torus teacher");
  sample->add_option("--seed", st_seed);
  sample->add_option("--output", st_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*train) {
      ExperimentConfig d = preset_config(Preset::WidthSweep, true);
      d.widths = {128};
      d.regs = {Regularizer::biased()};
      d.n_runs = 1;
      return run_and_write(train_flags.build(d));
    }
    if (*sweep) return run_and_write(sweep_flags.build(preset_config(Preset::WidthSweep, true)));
    if (*solve) {
      pde.times = parse_times(pde_times);
      const PdeTable table = solve_pde_cmd(pde);
      write_file(pde_out, pde_table_csv(table));
      std::fprintf(stderr, "wrote %s\n", pde_out.c_str());
      return 0;
    }
    if (*compare) {
      const auto rows = compare_series(load_series(cmp_a), load_series(cmp_b), cmp_metric);
      write_file(cmp_out, compare_csv(rows));
      std::fprintf(stderr, "wrote %s (%zu rows)\n", cmp_out.c_str(), rows.size());
      return 0;
    }
    if (*sample) {
      TeacherSpec spec = st_torus ? TeacherSpec::torus_default(st_gamma, st_width)
                                  : TeacherSpec::circle_default(st_gamma, st_width);
      Rng rng(st_seed);
      ParticleSnapshot snap;
      snap.state = sample_teacher(spec, rng);
      snap.header = {{"k", 0}, {"t", 0.0}, {"gamma", format_double(st_gamma)}, {"seed", st_seed}};
      write_file(st_out, particle_snapshot_csv(snap));
      std::fprintf(stderr, "wrote %s\n", st_out.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
