#include "varpro/config.hpp"

#include "varpro/density.hpp"
#include "varpro/metrics.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace varpro {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(v);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw InvalidInput("empty list value");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "inf" || t == "+inf" || t == "infinity") return std::numeric_limits<double>::infinity();
  try {
    std::size_t pos = 0;
    const double d = std::stod(t, &pos);
    if (pos != t.size()) throw InvalidInput("");
    return d;
  } catch (const std::exception&) {
    throw InvalidInput("bad number for " + key + ": " + v);
  }
}

long parse_long(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  long out = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) throw InvalidInput("bad integer for " + key + ": " + v);
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  std::uint64_t out = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) throw InvalidInput("bad seed for " + key + ": " + v);
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw InvalidInput("bad boolean for " + key + ": " + v);
}

std::string fmt(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <class T, class F>
std::string join(const std::vector<T>& xs, F f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += f(xs[i]);
  }
  return out;
}

}  // namespace

std::string to_string(Preset p) {
  switch (p) {
    case Preset::WidthSweep: return "width-sweep";
    case Preset::LambdaSweep: return "lambda-sweep";
    case Preset::GammaSweep: return "gamma-sweep";
    case Preset::TwoTimescaleCompare: return "two-timescale-compare";
    case Preset::PdeCompare: return "pde-compare";
    case Preset::TorusRbf: return "torus-rbf";
  }
  return "?";
}

Preset preset_from_string(std::string_view name) {
  for (Preset p : {Preset::WidthSweep, Preset::LambdaSweep, Preset::GammaSweep, Preset::TwoTimescaleCompare,
                   Preset::PdeCompare, Preset::TorusRbf}) {
    if (to_string(p) == name) return p;
  }
  throw InvalidInput("unknown preset: " + std::string(name));
}

void ExperimentConfig::validate() const {
  if (algorithms.empty() || regs.empty() || gammas.empty() || lambdas.empty() || widths.empty()) {
    throw InvalidInput("sweep lists must be non-empty");
  }
  for (const auto& r : regs) r.validate();
  for (double g : gammas) {
    if (std::isnan(g) || g < 0.0) throw InvalidInput("gamma must be >= 0");
  }
  for (double l : lambdas) {
    if (!(l > 0.0) || !std::isfinite(l)) throw InvalidInput("lambda must be positive");
  }
  for (int m : widths) {
    if (m < 1) throw InvalidInput("widths must be positive");
  }
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidInput("tau must be positive");
  if (iters < 0) throw InvalidInput("iters must be nonnegative");
  if (eval_every < 1) throw InvalidInput("eval_every must be positive");
  if (n_samples < 1 || teacher_width < 1) throw InvalidInput("sample counts must be positive");
  if (eta && !(*eta >= 0.0)) throw InvalidInput("eta must be nonnegative");
  if (n_runs < 1) throw InvalidInput("n_runs must be at least 1");
  if (workers < 0) throw InvalidInput("workers must be nonnegative");
  if (snapshot_every < 0) throw InvalidInput("snapshot_every must be nonnegative");
  if (pde_coefficient && !(*pde_coefficient > 0.0)) throw InvalidInput("pde_coefficient must be positive");
  if (!mmd_distance.empty()) energy_distance_from_string(mmd_distance);
  Grid1D{pde_cells}.validate();
}

ExperimentConfig preset_config(Preset p, bool mini) {
  ExperimentConfig c;
  c.preset = p;
  c.mini = mini;
  c.n_samples = mini ? 1024 : 4096;
  c.teacher_width = mini ? 1024 : 4096;
  c.iters = mini ? 2048 : 8192;
  c.eval_every = mini ? 16 : 64;
  const std::vector<int> widths = mini ? std::vector<int>{32, 128, 256} : std::vector<int>{32, 128, 512, 1024};
  const int wide = mini ? 256 : 1024;

  switch (p) {
    case Preset::WidthSweep:
      c.widths = widths;
      c.regs = {Regularizer::biased(), Regularizer::unbiased()};
      c.lambdas = {1e-3};
      break;
    case Preset::LambdaSweep:
      c.widths = {wide};
      c.regs = {Regularizer::biased()};
      c.lambdas = mini ? std::vector<double>{1e-1, 1e-2, 1e-3} : std::vector<double>{1e-1, 1e-2, 1e-3, 1e-4};
      if (mini) {
        // Long horizon (t = 32) within the desk-scale iteration budget.
        c.tau = 0x1.0p-7;
        c.iters = 4096;
        c.eval_every = 32;
      }
      break;
    case Preset::GammaSweep:
      c.widths = {wide};
      c.regs = {Regularizer::unbiased()};
      c.gammas = {10.0, 100.0, 1000.0};
      c.lambdas = {mini ? 1e-3 : 1e-4};
      break;
    case Preset::TwoTimescaleCompare:
      c.algorithms = {Algorithm::VarPro, Algorithm::TwoTimescale};
      c.widths = widths;
      c.regs = {Regularizer::unbiased()};
      c.lambdas = {1e-1, 1e-2, 1e-3};
      break;
    case Preset::PdeCompare:
      c.widths = {wide};
      c.regs = {Regularizer::biased()};
      c.lambdas = {mini ? 1e-3 : 1e-4};
      c.snapshot_every = mini ? 256 : 1024;
      break;
    case Preset::TorusRbf:
      c.torus = true;
      c.with_pde = false;
      c.widths = mini ? std::vector<int>{32, 128} : std::vector<int>{32, 128, 512, 1024};
      c.regs = {Regularizer::biased(), Regularizer::unbiased()};
      c.lambdas = {1e-3};
      break;
  }
  return c;
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty() || t.front() == '[') continue;  // section headers are cosmetic
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw InvalidInput("config line " + std::to_string(lineno) + " has no '='");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw InvalidInput("config line " + std::to_string(lineno) + " has an empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

void apply_overrides(ExperimentConfig& c, const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "preset") c.preset = preset_from_string(value);
    else if (key == "mini") c.mini = parse_bool(key, value);
    else if (key == "torus") c.torus = parse_bool(key, value);
    else if (key == "algorithms") {
      c.algorithms.clear();
      for (const auto& s : split_list(value)) c.algorithms.push_back(algorithm_from_string(s));
    } else if (key == "regs") {
      c.regs.clear();
      for (const auto& s : split_list(value)) c.regs.push_back(regularizer_from_string(s));
    } else if (key == "gammas") {
      c.gammas.clear();
      for (const auto& s : split_list(value)) c.gammas.push_back(parse_double(key, s));
    } else if (key == "lambdas") {
      c.lambdas.clear();
      for (const auto& s : split_list(value)) c.lambdas.push_back(parse_double(key, s));
    } else if (key == "widths") {
      c.widths.clear();
      for (const auto& s : split_list(value)) c.widths.push_back(static_cast<int>(parse_long(key, s)));
    } else if (key == "tau") c.tau = parse_double(key, value);
    else if (key == "iters") c.iters = parse_long(key, value);
    else if (key == "eval_every") c.eval_every = parse_long(key, value);
    else if (key == "n_samples") c.n_samples = static_cast<int>(parse_long(key, value));
    else if (key == "teacher_width") c.teacher_width = static_cast<int>(parse_long(key, value));
    else if (key == "eta") {
      if (value == "auto" || value.empty()) c.eta.reset();
      else c.eta = parse_double(key, value);
    } else if (key == "n_runs") c.n_runs = static_cast<int>(parse_long(key, value));
    else if (key == "base_seed") c.base_seed = parse_u64(key, value);
    else if (key == "output") c.output = value;
    else if (key == "workers") c.workers = static_cast<int>(parse_long(key, value));
    else if (key == "with_pde") c.with_pde = parse_bool(key, value);
    else if (key == "pde_cells") c.pde_cells = static_cast<int>(parse_long(key, value));
    else if (key == "pde_rel_tol") c.pde_rel_tol = parse_double(key, value);
    else if (key == "pde_abs_tol") c.pde_abs_tol = parse_double(key, value);
    else if (key == "pde_coefficient") {
      if (value == "auto" || value.empty()) c.pde_coefficient.reset();
      else c.pde_coefficient = parse_double(key, value);
    } else if (key == "mmd_distance") c.mmd_distance = value == "auto" ? "" : value;
    else if (key == "snapshot_every") c.snapshot_every = parse_long(key, value);
    else if (key == "keep_states") c.keep_states = parse_bool(key, value);
    else throw InvalidInput("unknown config key: " + key);
  }
}

ExperimentConfig config_from_text(const std::string& text) {
  const auto kv = parse_key_values(text);
  Preset p = Preset::WidthSweep;
  bool mini = true;
  for (const auto& [k, v] : kv) {
    if (k == "preset") p = preset_from_string(v);
    if (k == "mini") mini = parse_bool(k, v);
  }
  ExperimentConfig c = preset_config(p, mini);
  apply_overrides(c, kv);
  c.validate();
  return c;
}

std::string to_text(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "preset = " << to_string(c.preset) << "\n";
  os << "mini = " << (c.mini ? "true" : "false") << "\n";
  os << "torus = " << (c.torus ? "true" : "false") << "\n";
  os << "algorithms = " << join(c.algorithms, [](Algorithm a) { return std::string(to_string(a)); }) << "\n";
  os << "regs = " << join(c.regs, [](const Regularizer& r) { return to_string(r); }) << "\n";
  os << "gammas = " << join(c.gammas, fmt) << "\n";
  os << "lambdas = " << join(c.lambdas, fmt) << "\n";
  os << "widths = " << join(c.widths, [](int m) { return std::to_string(m); }) << "\n";
  os << "tau = " << fmt(c.tau) << "\n";
  os << "iters = " << c.iters << "\n";
  os << "eval_every = " << c.eval_every << "\n";
  os << "n_samples = " << c.n_samples << "\n";
  os << "teacher_width = " << c.teacher_width << "\n";
  os << "eta = " << (c.eta ? fmt(*c.eta) : "auto") << "\n";
  os << "n_runs = " << c.n_runs << "\n";
  os << "base_seed = " << c.base_seed << "\n";
  os << "output = " << c.output << "\n";
  os << "workers = " << c.workers << "\n";
  os << "with_pde = " << (c.with_pde ? "true" : "false") << "\n";
  os << "pde_cells = " << c.pde_cells << "\n";
  os << "pde_rel_tol = " << fmt(c.pde_rel_tol) << "\n";
  os << "pde_abs_tol = " << fmt(c.pde_abs_tol) << "\n";
  os << "pde_coefficient = " << (c.pde_coefficient ? fmt(*c.pde_coefficient) : "auto") << "\n";
  os << "mmd_distance = " << (c.mmd_distance.empty() ? "auto" : c.mmd_distance) << "\n";
  os << "snapshot_every = " << c.snapshot_every << "\n";
  os << "keep_states = " << (c.keep_states ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace varpro
