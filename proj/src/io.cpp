#include "varpro/io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace varpro {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

// Splits off the `# {json}` first line.
nlohmann::json take_header(std::istringstream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw InvalidInput("snapshot file lacks a '# {json}' header");
  try {
    return nlohmann::json::parse(line.substr(2));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("bad snapshot header: ") + e.what());
  }
}

}  // namespace

std::string git_blob_hash(const std::string& content) {
  const std::string prefix = "blob " + std::to_string(content.size()) + '\0';
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("cannot allocate a digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, prefix.data(), prefix.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, md, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("SHA-1 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string write_file(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + p.string());
  return git_blob_hash(content);
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_csv_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw InvalidInput("bad number in CSV: " + s);
  return x;
}

std::string particle_snapshot_csv(const ParticleSnapshot& snap) {
  const ParticleEnsemble& e = snap.state;
  nlohmann::json header = snap.header;
  header["domain"] = std::string(to_string(e.domain.kind));
  header["dim"] = e.domain.dim;
  header["period"] = e.domain.period;
  std::ostringstream os;
  os << "# " << header.dump() << "\n";
  for (int k = 0; k < e.domain.dim; ++k) os << "coord" << k << ",";
  os << "outer\n";
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    for (int k = 0; k < e.domain.dim; ++k) os << format_double(e.atoms[i][k]) << ",";
    if (e.outer) os << format_double((*e.outer)[i]);
    os << "\n";
  }
  return os.str();
}

ParticleSnapshot parse_particle_snapshot(const std::string& text) {
  std::istringstream is(text);
  ParticleSnapshot snap;
  snap.header = take_header(is);
  Domain d;
  try {
    d.kind = domain_kind_from_string(snap.header.at("domain").get<std::string>());
    d.dim = snap.header.at("dim").get<int>();
    d.period = snap.header.at("period").get<double>();
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidInput(std::string("snapshot header is missing domain fields: ") + ex.what());
  }
  d.validate();
  snap.state.domain = d;
  snap.state.iteration = snap.header.value("k", 0L);

  std::string line;
  std::getline(is, line);  // column header
  std::vector<double> outer;
  bool has_outer = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (static_cast<int>(cells.size()) != d.dim + 1) throw InvalidInput("bad snapshot row: " + line);
    Coords c(d.dim);
    for (int k = 0; k < d.dim; ++k) c[k] = parse_csv_double(cells[k]);
    snap.state.atoms.push_back(canonicalize(c, d));
    if (cells.back().empty()) has_outer = false;
    else outer.push_back(parse_csv_double(cells.back()));
  }
  if (snap.state.atoms.empty()) throw InvalidInput("snapshot has no atoms");
  if (has_outer) snap.state.outer = Eigen::Map<Eigen::VectorXd>(outer.data(), static_cast<Eigen::Index>(outer.size()));
  return snap;
}

std::string pde_table_csv(const PdeTable& table) {
  if (table.times.size() != table.fields.size() || table.fields.empty()) {
    throw InvalidInput("pde table needs one field per time");
  }
  const Grid1D grid = table.fields.front().grid;
  nlohmann::json header = table.header;
  header["n_cells"] = grid.n_cells;
  std::ostringstream os;
  os << "# " << header.dump() << "\n";
  os << "center";
  for (double t : table.times) os << "," << format_double(t);
  os << "\n";
  for (int j = 0; j < grid.n_cells; ++j) {
    os << format_double(grid.center(j));
    for (const auto& f : table.fields) os << "," << format_double(f.values[j]);
    os << "\n";
  }
  return os.str();
}

PdeTable parse_pde_table(const std::string& text) {
  std::istringstream is(text);
  PdeTable table;
  table.header = take_header(is);
  const int n = table.header.value("n_cells", 0);
  const Grid1D grid{n};
  grid.validate();

  std::string line;
  if (!std::getline(is, line)) throw InvalidInput("pde table has no column header");
  const auto cols = split(line, ',');
  if (cols.size() < 2 || cols.front() != "center") throw InvalidInput("bad pde table column header");
  for (std::size_t c = 1; c < cols.size(); ++c) {
    table.times.push_back(parse_csv_double(cols[c]));
    table.fields.push_back(DensityField{grid, Eigen::VectorXd(n)});
  }
  int j = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (j >= n) throw InvalidInput("pde table has too many rows");
    const auto cells = split(line, ',');
    if (cells.size() != cols.size()) throw InvalidInput("bad pde table row");
    for (std::size_t c = 1; c < cells.size(); ++c) table.fields[c - 1].values[j] = parse_csv_double(cells[c]);
    ++j;
  }
  if (j != n) throw InvalidInput("pde table row count does not match n_cells");
  return table;
}

}  // namespace varpro
