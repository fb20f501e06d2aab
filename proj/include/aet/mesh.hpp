#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace aet {

using Point = Eigen::Vector2d;
using Triangle = std::array<int, 3>;
using Edge = std::array<int, 2>;

// P1 fields: one value per node. P0 fields: one value per triangle.
using NodalField = Eigen::VectorXd;
using ElementField = Eigen::VectorXd;

/// Conforming, counter-clockwise oriented triangulation of a planar domain.
///
/// The boundary edge loop is recomputed from connectivity on construction and
/// the constructor rejects meshes violating positivity of areas, conformity or
/// a single closed boundary loop. Immutable after construction.
class Mesh {
 public:
  Mesh(std::vector<Point> nodes, std::vector<Triangle> triangles);

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }

  const std::vector<Point>& nodes() const { return nodes_; }
  const Point& node(int i) const { return nodes_[i]; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const Triangle& triangle(int t) const { return triangles_[t]; }
  // Boundary edges oriented as in their owning triangle (domain on the left).
  const std::vector<Edge>& boundary_edges() const { return boundary_edges_; }
  // Triangle owning each boundary edge.
  const std::vector<int>& boundary_edge_triangles() const { return boundary_edge_triangles_; }

  // Maximum edge length.
  double h() const { return h_; }
  double area(int t) const { return areas_[t]; }
  const Eigen::VectorXd& areas() const { return areas_; }
  double total_area() const { return total_area_; }
  // Sum of the areas of the triangles adjacent to node i.
  double patch_area(int i) const { return patch_areas_[i]; }
  const Eigen::VectorXd& patch_areas() const { return patch_areas_; }
  // Columns are the constant gradients of the three local hat functions.
  const Eigen::Matrix<double, 2, 3>& basis_gradients(int t) const { return grads_[t]; }
  std::span<const int> node_triangles(int i) const;
  Point centroid(int t) const;

  // FNV-1a over coordinate bit patterns and connectivity.
  std::uint64_t hash() const { return hash_; }

 private:
  void build_boundary();
  void compute_geometry();

  std::vector<Point> nodes_;
  std::vector<Triangle> triangles_;
  std::vector<Edge> boundary_edges_;
  std::vector<int> boundary_edge_triangles_;
  std::vector<Eigen::Matrix<double, 2, 3>> grads_;
  Eigen::VectorXd areas_;
  Eigen::VectorXd patch_areas_;
  std::vector<int> node_tri_offsets_;
  std::vector<int> node_tri_list_;
  double h_ = 0.0;
  double total_area_ = 0.0;
  std::uint64_t hash_ = 0;
};

/// Concentric-ring triangulation of the unit disk with target mesh size h.
/// Ring k (k = 1..n, n = ceil(1/h)) sits at radius k/n and carries 6k nodes.
Mesh generate_disk_mesh(double h);

// Gmsh MSH ASCII 2.2 (element types 1 and 2; type 15 points are skipped).
Mesh read_msh(const std::filesystem::path& path);
Mesh parse_msh(std::istream& in);
void write_msh(const Mesh& mesh, const std::filesystem::path& path);

struct PointLocation {
  int triangle_index = -1;
  Eigen::Vector3d barycentric = Eigen::Vector3d::Zero();
};

// Uniform background grid over triangle bounding boxes.
class PointLocator {
 public:
  explicit PointLocator(const Mesh& mesh);

  // Throws NotFoundError when p lies outside the mesh by more than tol().
  PointLocation locate(const Point& p) const;

  // Like locate(), but points outside the polygon by at most clamp_distance are
  // projected onto the nearest boundary edge first.
  PointLocation locate_clamped(const Point& p, double clamp_distance) const;

  double tol() const { return tol_; }

 private:
  bool try_locate(const Point& p, PointLocation& out) const;

  const Mesh* mesh_;
  Eigen::Vector2d lo_;
  double cell_ = 1.0;
  int nx_ = 1;
  int ny_ = 1;
  std::vector<int> cell_offsets_;
  std::vector<int> cell_triangles_;
  double tol_ = 0.0;
};

PointLocation locate_point(const Mesh& mesh, const Point& p);

Eigen::Vector3d barycentric(const Mesh& mesh, int t, const Point& p);

/// Evaluates the P1 field src_field (on src_mesh) at the nodes of dst_mesh.
/// dst nodes outside src_mesh by less than h_src^2 are clamped onto its boundary.
NodalField interpolate_p1(const Mesh& src_mesh, const NodalField& src_field, const Mesh& dst_mesh);

}  // namespace aet
