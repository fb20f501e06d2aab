#pragma once

#include "aet/mesh.hpp"
#include "aet/reconstruction.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace aet {

using NamedField = std::pair<std::string, NodalField>;

/// Legacy VTK 3.0 ASCII unstructured grid (triangles, cell type 5) with one
/// SCALARS block per nodal field. Output is deterministic byte for byte.
void export_vtk(const Mesh& mesh, const std::vector<NamedField>& fields, const std::filesystem::path& path);
void write_vtk(const Mesh& mesh, const std::vector<NamedField>& fields, std::ostream& out);

inline constexpr const char* kHistoryHeader = "k,J_beta,fit,tv,e_L1,e_TV,e_dBV,update_norm,seconds";

/// CSV, one row per outer iteration, 17 significant digits.
void export_history(const ReconHistory& history, const std::filesystem::path& path);
void write_history(const ReconHistory& history, std::ostream& out);
ReconHistory import_history(const std::filesystem::path& path);
ReconHistory parse_history(std::istream& in);

/// Field text format:
///   AETFIELD v1
///   mesh <16 hex digits of Mesh::hash()>
///   nodes <count>
///   <one value per line, 17 significant digits>
struct StoredField {
  std::uint64_t mesh_hash = 0;
  NodalField values;
};

void write_field(const Mesh& mesh, const NodalField& values, const std::filesystem::path& path);
void write_field(std::uint64_t mesh_hash, const NodalField& values, std::ostream& out);
StoredField read_field(const std::filesystem::path& path);
StoredField parse_field(std::istream& in);

// Reads a field and checks that it belongs to `mesh`.
NodalField read_field_for(const Mesh& mesh, const std::filesystem::path& path);

std::string format_double(double v);
std::string hex64(std::uint64_t v);

}  // namespace aet
