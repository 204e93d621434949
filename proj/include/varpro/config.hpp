#pragma once

#include "varpro/trainer.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace varpro {

enum class Preset { WidthSweep, LambdaSweep, GammaSweep, TwoTimescaleCompare, PdeCompare, TorusRbf };

std::string to_string(Preset p);
Preset preset_from_string(std::string_view name);

/// Full description of a sweep. Every list is a sweep axis; parameter points are
/// their Cartesian product in the order algorithms, regs, gammas, lambdas, widths.
///
/// Text form: one `key = value` per line, `#` starts a comment, lists are
/// comma-separated. Keys match the field names below.
struct ExperimentConfig {
  Preset preset = Preset::WidthSweep;
  bool mini = true;
  bool torus = false;  ///< LaplaceTorus features on R^2 / 4Z^2 instead of ReLU on S^1

  std::vector<Algorithm> algorithms{Algorithm::VarPro};
  std::vector<Regularizer> regs{Regularizer::biased()};
  std::vector<double> gammas{100.0};
  std::vector<double> lambdas{1e-3};
  std::vector<int> widths{32, 128, 256};

  double tau = 0x1.0p-10;
  long iters = 2048;
  long eval_every = 16;
  int n_samples = 1024;
  int teacher_width = 1024;
  std::optional<double> eta;

  int n_runs = 6;
  std::uint64_t base_seed = 20240601;
  std::string output = "out";
  int workers = 0;  ///< 0 picks the hardware concurrency

  bool with_pde = true;  ///< evaluate mmd_pde and chi2 (circle only)
  int pde_cells = 512;
  double pde_rel_tol = 1e-8;
  double pde_abs_tol = 1e-10;
  std::optional<double> pde_coefficient;  ///< defaults from the regularizer

  std::string mmd_distance;  ///< empty picks the domain default
  long snapshot_every = 0;   ///< 0 disables particle snapshot files
  bool keep_states = false;  ///< keep logged ensembles in memory (library use)

  void validate() const;
};

/// Preset defaults; `mini` selects the desk-scale variant.
ExperimentConfig preset_config(Preset p, bool mini);

/// Applies `key = value` assignments in order. Throws InvalidInput on unknown keys
/// or malformed values.
void apply_overrides(ExperimentConfig& cfg, const std::vector<std::pair<std::string, std::string>>& kv);

/// Parses the flat text format into ordered key/value pairs.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);

/// Builds a config from text: the `preset` and `mini` keys are applied first, then
/// every other key overrides the preset defaults.
ExperimentConfig config_from_text(const std::string& text);

/// Canonical text form; config_from_text(to_text(c)) reproduces c.
std::string to_text(const ExperimentConfig& cfg);

}  // namespace varpro
