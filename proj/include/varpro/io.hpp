#pragma once

#include "varpro/density.hpp"
#include "varpro/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace varpro {

/// Hex SHA-1 of "blob <len>\0<content>", the object id git assigns to a file.
std::string git_blob_hash(const std::string& content);

std::string read_file(const std::filesystem::path& p);

/// Writes the file (creating parent directories) and returns its git blob hash.
std::string write_file(const std::filesystem::path& p, const std::string& content);

/// Shortest round-trip decimal form ("nan" and "inf" for non-finite values).
std::string format_double(double x);
double parse_csv_double(const std::string& s);

/// Particle snapshot: a `# {json}` header line, a column header, then one row per
/// atom with its coordinates and outer weight (empty when absent).
struct ParticleSnapshot {
  nlohmann::json header;  ///< at least k, t, cfg_hash, domain, dim, period
  ParticleEnsemble state;
};

std::string particle_snapshot_csv(const ParticleSnapshot& snap);
ParticleSnapshot parse_particle_snapshot(const std::string& text);

/// PDE snapshot table: `# {json}` header, then `center,<t_0>,<t_1>,...` and one row
/// per cell.
struct PdeTable {
  nlohmann::json header;
  std::vector<double> times;
  std::vector<DensityField> fields;
};

std::string pde_table_csv(const PdeTable& table);
PdeTable parse_pde_table(const std::string& text);

}  // namespace varpro
