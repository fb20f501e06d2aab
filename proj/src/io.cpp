#include "aet/io.hpp"

#include "aet/error.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace aet {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

double parse_double(const std::string& token, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (token.empty() || end != token.c_str() + token.size()) {
    throw ParseError(context + ": invalid number '" + token + "'");
  }
  return v;
}

}  // namespace

void write_vtk(const Mesh& mesh, const std::vector<NamedField>& fields, std::ostream& out) {
  out << "# vtk DataFile Version 3.0\n";
  out << "aet field export\n";
  out << "ASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_nodes() << " double\n";
  for (const auto& p : mesh.nodes()) out << format_double(p.x()) << ' ' << format_double(p.y()) << " 0\n";
  out << "CELLS " << mesh.num_triangles() << ' ' << 4 * mesh.num_triangles() << "\n";
  for (const auto& t : mesh.triangles()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << "\n";
  out << "CELL_TYPES " << mesh.num_triangles() << "\n";
  for (int t = 0; t < mesh.num_triangles(); ++t) out << "5\n";
  if (fields.empty()) return;
  out << "POINT_DATA " << mesh.num_nodes() << "\n";
  for (const auto& [name, values] : fields) {
    if (values.size() != mesh.num_nodes()) throw DomainError("export_vtk: field '" + name + "' size mismatch");
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos) {
      throw DomainError("export_vtk: field name must be a single nonempty token");
    }
    out << "SCALARS " << name << " double 1\n";
    out << "LOOKUP_TABLE default\n";
    for (int i = 0; i < values.size(); ++i) out << format_double(values[i]) << "\n";
  }
}

void export_vtk(const Mesh& mesh, const std::vector<NamedField>& fields, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_vtk(mesh, fields, out);
  if (!out) throw IoError("write failed for " + path.string());
}

void write_history(const ReconHistory& history, std::ostream& out) {
  out << kHistoryHeader << "\n";
  for (const auto& r : history.rows) {
    out << r.k;
    for (double v : {r.J_beta, r.fit, r.tv, r.e_L1, r.e_TV, r.e_dBV, r.update_norm, r.seconds}) {
      out << ',' << format_double(v);
    }
    out << "\n";
  }
}

void export_history(const ReconHistory& history, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_history(history, out);
  if (!out) throw IoError("write failed for " + path.string());
}

ReconHistory parse_history(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kHistoryHeader) throw ParseError("history: missing or unexpected header");
  ReconHistory h;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    const std::string ctx = "history line " + std::to_string(lineno);
    if (cells.size() != 9) throw ParseError(ctx + ": expected 9 columns");
    HistoryRow r;
    r.k = static_cast<int>(parse_double(cells[0], ctx));
    double* dst[] = {&r.J_beta, &r.fit, &r.tv, &r.e_L1, &r.e_TV, &r.e_dBV, &r.update_norm, &r.seconds};
    for (int c = 0; c < 8; ++c) *dst[c] = parse_double(cells[c + 1], ctx);
    h.rows.push_back(r);
  }
  return h;
}

ReconHistory import_history(const std::filesystem::path& path) {
  auto in = open_in(path);
  return parse_history(in);
}

void write_field(std::uint64_t mesh_hash, const NodalField& values, std::ostream& out) {
  out << "AETFIELD v1\n";
  out << "mesh " << hex64(mesh_hash) << "\n";
  out << "nodes " << values.size() << "\n";
  for (int i = 0; i < values.size(); ++i) out << format_double(values[i]) << "\n";
}

void write_field(const Mesh& mesh, const NodalField& values, const std::filesystem::path& path) {
  if (values.size() != mesh.num_nodes()) throw DomainError("write_field: field size does not match mesh");
  auto out = open_out(path);
  write_field(mesh.hash(), values, out);
  if (!out) throw IoError("write failed for " + path.string());
}

StoredField parse_field(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "AETFIELD v1") throw ParseError("field: missing 'AETFIELD v1' header");
  StoredField f;
  std::string key, value;
  if (!std::getline(in, line)) throw ParseError("field: missing mesh line");
  {
    std::istringstream ls(line);
    if (!(ls >> key >> value) || key != "mesh" || value.size() != 16) throw ParseError("field: malformed mesh line");
    char* end = nullptr;
    f.mesh_hash = std::strtoull(value.c_str(), &end, 16);
    if (end != value.c_str() + value.size()) throw ParseError("field: malformed mesh hash");
  }
  long count = -1;
  if (!std::getline(in, line)) throw ParseError("field: missing nodes line");
  {
    std::istringstream ls(line);
    if (!(ls >> key >> count) || key != "nodes" || count < 0) throw ParseError("field: malformed nodes line");
  }
  f.values.resize(count);
  for (long i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw ParseError("field: expected " + std::to_string(count) + " values");
    f.values[i] = parse_double(line, "field value " + std::to_string(i));
  }
  return f;
}

StoredField read_field(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return parse_field(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

NodalField read_field_for(const Mesh& mesh, const std::filesystem::path& path) {
  StoredField f = read_field(path);
  if (f.mesh_hash != mesh.hash() || f.values.size() != mesh.num_nodes()) {
    throw DomainError(path.string() + ": field belongs to mesh " + hex64(f.mesh_hash) + ", expected " +
                      hex64(mesh.hash()));
  }
  return std::move(f.values);
}

}  // namespace aet
