#include "aet/mesh.hpp"

#include "aet/error.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <unordered_map>

namespace aet {

namespace {

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

double signed_area(const Point& a, const Point& b, const Point& c) { return 0.5 * cross(b - a, c - a); }

struct HalfEdge {
  std::uint64_t key;
  int from;
  int to;
  int tri;
};

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

class Fnv1a {
 public:
  void add(std::uint64_t word) {
    for (int k = 0; k < 8; ++k) {
      state_ ^= (word >> (8 * k)) & 0xffu;
      state_ *= 0x100000001b3ull;
    }
  }
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ull;
};

}  // namespace

Mesh::Mesh(std::vector<Point> nodes, std::vector<Triangle> triangles)
    : nodes_(std::move(nodes)), triangles_(std::move(triangles)) {
  if (nodes_.empty() || triangles_.empty()) throw DomainError("mesh: empty node or triangle list");
  const int n = num_nodes();
  std::vector<char> used(n, 0);
  for (int t = 0; t < num_triangles(); ++t) {
    for (int v : triangles_[t]) {
      if (v < 0 || v >= n) throw DomainError("mesh: triangle " + std::to_string(t) + " references invalid node");
      used[v] = 1;
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!used[i]) throw DomainError("mesh: node " + std::to_string(i) + " belongs to no triangle");
    if (!nodes_[i].allFinite()) throw DomainError("mesh: node " + std::to_string(i) + " has non-finite coordinates");
  }
  compute_geometry();
  build_boundary();
}

void Mesh::compute_geometry() {
  const int nt = num_triangles();
  areas_.resize(nt);
  grads_.resize(nt);
  patch_areas_ = Eigen::VectorXd::Zero(num_nodes());
  Eigen::Matrix<double, 2, 3> ref;
  ref << -1.0, 1.0, 0.0, -1.0, 0.0, 1.0;
  h_ = 0.0;
  for (int t = 0; t < nt; ++t) {
    const auto& [a, b, c] = triangles_[t];
    const double area = signed_area(nodes_[a], nodes_[b], nodes_[c]);
    if (!(area > 0.0)) {
      throw DomainError("mesh: triangle " + std::to_string(t) + " has nonpositive signed area");
    }
    areas_[t] = area;
    Eigen::Matrix2d jac;
    jac.col(0) = nodes_[b] - nodes_[a];
    jac.col(1) = nodes_[c] - nodes_[a];
    grads_[t] = jac.inverse().transpose() * ref;
    for (int v : triangles_[t]) patch_areas_[v] += area;
    h_ = std::max({h_, (nodes_[a] - nodes_[b]).norm(), (nodes_[b] - nodes_[c]).norm(), (nodes_[c] - nodes_[a]).norm()});
  }
  total_area_ = areas_.sum();

  node_tri_offsets_.assign(num_nodes() + 1, 0);
  for (const auto& tri : triangles_)
    for (int v : tri) ++node_tri_offsets_[v + 1];
  for (int i = 0; i < num_nodes(); ++i) node_tri_offsets_[i + 1] += node_tri_offsets_[i];
  node_tri_list_.resize(node_tri_offsets_.back());
  std::vector<int> fill(node_tri_offsets_.begin(), node_tri_offsets_.end() - 1);
  for (int t = 0; t < nt; ++t)
    for (int v : triangles_[t]) node_tri_list_[fill[v]++] = t;

  Fnv1a fnv;
  fnv.add(static_cast<std::uint64_t>(num_nodes()));
  fnv.add(static_cast<std::uint64_t>(nt));
  for (const auto& p : nodes_) {
    fnv.add(std::bit_cast<std::uint64_t>(p.x()));
    fnv.add(std::bit_cast<std::uint64_t>(p.y()));
  }
  for (const auto& tri : triangles_)
    for (int v : tri) fnv.add(static_cast<std::uint64_t>(v));
  hash_ = fnv.value();
}

void Mesh::build_boundary() {
  std::vector<HalfEdge> half;
  half.reserve(3 * triangles_.size());
  for (int t = 0; t < num_triangles(); ++t) {
    const auto& tri = triangles_[t];
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k];
      const int b = tri[(k + 1) % 3];
      half.push_back({edge_key(a, b), a, b, t});
    }
  }
  std::sort(half.begin(), half.end(), [](const HalfEdge& x, const HalfEdge& y) {
    return x.key != y.key ? x.key < y.key : x.tri < y.tri;
  });

  std::vector<HalfEdge> boundary;
  for (std::size_t i = 0; i < half.size();) {
    std::size_t j = i;
    while (j < half.size() && half[j].key == half[i].key) ++j;
    const std::size_t count = j - i;
    if (count == 1) {
      boundary.push_back(half[i]);
    } else if (count == 2) {
      if (half[i].from == half[i + 1].from) {
        throw DomainError("mesh: triangles " + std::to_string(half[i].tri) + " and " + std::to_string(half[i + 1].tri) +
                          " have inconsistent orientation");
      }
    } else {
      throw DomainError("mesh: edge (" + std::to_string(half[i].from) + "," + std::to_string(half[i].to) +
                        ") shared by more than two triangles");
    }
    i = j;
  }
  if (boundary.empty()) throw DomainError("mesh: no boundary edges");

  // Walk the loop starting at the edge with the smallest key.
  std::unordered_map<int, std::size_t> outgoing;
  for (std::size_t e = 0; e < boundary.size(); ++e) {
    if (!outgoing.emplace(boundary[e].from, e).second) {
      throw DomainError("mesh: boundary is not a simple closed loop at node " + std::to_string(boundary[e].from));
    }
  }
  boundary_edges_.clear();
  boundary_edge_triangles_.clear();
  std::size_t e = 0;
  for (std::size_t step = 0; step < boundary.size(); ++step) {
    boundary_edges_.push_back({boundary[e].from, boundary[e].to});
    boundary_edge_triangles_.push_back(boundary[e].tri);
    auto it = outgoing.find(boundary[e].to);
    if (it == outgoing.end()) throw DomainError("mesh: open boundary at node " + std::to_string(boundary[e].to));
    e = it->second;
    if (e == 0 && step + 1 != boundary.size()) {
      throw DomainError("mesh: boundary consists of more than one loop");
    }
  }
  if (e != 0) throw DomainError("mesh: boundary loop does not close");
}

std::span<const int> Mesh::node_triangles(int i) const {
  return {node_tri_list_.data() + node_tri_offsets_[i],
          static_cast<std::size_t>(node_tri_offsets_[i + 1] - node_tri_offsets_[i])};
}

Point Mesh::centroid(int t) const {
  const auto& [a, b, c] = triangles_[t];
  return (nodes_[a] + nodes_[b] + nodes_[c]) / 3.0;
}

Mesh generate_disk_mesh(double h) {
  if (!(h > 0.0 && h < 1.0)) throw DomainError("generate_disk_mesh: h must lie in (0, 1)");
  const int rings = static_cast<int>(std::ceil(1.0 / h - 1e-9));
  const double dr = 1.0 / rings;
  constexpr double two_pi = 2.0 * std::numbers::pi;

  std::vector<Point> nodes;
  std::vector<int> ring_start{0};
  nodes.emplace_back(0.0, 0.0);
  for (int k = 1; k <= rings; ++k) {
    ring_start.push_back(static_cast<int>(nodes.size()));
    const int count = 6 * k;
    const double r = k * dr;
    for (int j = 0; j < count; ++j) {
      const double theta = two_pi * j / count;
      nodes.emplace_back(r * std::cos(theta), r * std::sin(theta));
    }
  }

  std::vector<Triangle> tris;
  auto push = [&](int a, int b, int c) {
    if (signed_area(nodes[a], nodes[b], nodes[c]) < 0.0) std::swap(b, c);
    tris.push_back({a, b, c});
  };
  for (int j = 0; j < 6; ++j) push(0, 1 + j, 1 + (j + 1) % 6);

  // Zip consecutive rings together by advancing along whichever ring has the
  // next node at the smaller angle; ties pick the shorter diagonal.
  for (int k = 1; k < rings; ++k) {
    const int n_in = 6 * k;
    const int n_out = 6 * (k + 1);
    auto in = [&](int a) { return ring_start[k] + a % n_in; };
    auto out = [&](int b) { return ring_start[k + 1] + b % n_out; };
    int a = 0;
    int b = 0;
    while (a < n_in || b < n_out) {
      bool advance_inner;
      if (a == n_in) {
        advance_inner = false;
      } else if (b == n_out) {
        advance_inner = true;
      } else {
        const double ang_in = static_cast<double>(a + 1) / n_in;
        const double ang_out = static_cast<double>(b + 1) / n_out;
        if (std::abs(ang_in - ang_out) > 1e-12) {
          advance_inner = ang_in < ang_out;
        } else {
          advance_inner = (nodes[in(a + 1)] - nodes[out(b)]).norm() <= (nodes[out(b + 1)] - nodes[in(a)]).norm();
        }
      }
      if (advance_inner) {
        push(in(a), out(b), in(a + 1));
        ++a;
      } else {
        push(in(a), out(b), out(b + 1));
        ++b;
      }
    }
  }
  return Mesh(std::move(nodes), std::move(tris));
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++lineno_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  }

  std::string require(const std::string& section) {
    std::string line;
    if (!next(line)) fail(section, "unexpected end of file");
    return line;
  }

  [[noreturn]] void fail(const std::string& section, const std::string& what) const {
    throw ParseError("msh: " + section + ": " + what + " (line " + std::to_string(lineno_) + ")");
  }

  int lineno() const { return lineno_; }

 private:
  std::istream& in_;
  int lineno_ = 0;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

}  // namespace

Mesh parse_msh(std::istream& input) {
  LineReader reader(input);
  std::string line;
  bool have_format = false;
  std::vector<long> node_ids;
  std::vector<Point> raw_nodes;
  std::vector<std::array<long, 3>> raw_tris;
  bool warned_z = false;

  while (reader.next(line)) {
    const std::string tag = trim(line);
    if (tag == "$MeshFormat") {
      std::istringstream fmt(reader.require("$MeshFormat"));
      std::string version;
      int file_type = -1;
      int data_size = 0;
      if (!(fmt >> version >> file_type >> data_size)) reader.fail("$MeshFormat", "malformed header");
      if (version.rfind("2.2", 0) != 0) reader.fail("$MeshFormat", "unsupported version " + version);
      if (file_type != 0) reader.fail("$MeshFormat", "only ASCII files are supported");
      if (trim(reader.require("$MeshFormat")) != "$EndMeshFormat") reader.fail("$MeshFormat", "missing $EndMeshFormat");
      have_format = true;
    } else if (tag == "$Nodes") {
      if (!have_format) reader.fail("$Nodes", "section appears before $MeshFormat");
      long count = -1;
      {
        std::istringstream cs(reader.require("$Nodes"));
        if (!(cs >> count) || count < 0) reader.fail("$Nodes", "malformed node count");
      }
      for (long k = 0; k < count; ++k) {
        const std::string l = reader.require("$Nodes");
        if (trim(l) == "$EndNodes") {
          reader.fail("$Nodes", "count mismatch: header says " + std::to_string(count) + ", found " + std::to_string(k));
        }
        std::istringstream ns(l);
        long id;
        double x, y, z;
        if (!(ns >> id >> x >> y >> z)) reader.fail("$Nodes", "malformed node line");
        if (z != 0.0 && !warned_z) {
          std::clog << "warning: msh: nonzero z coordinates dropped\n";
          warned_z = true;
        }
        node_ids.push_back(id);
        raw_nodes.emplace_back(x, y);
      }
      if (trim(reader.require("$Nodes")) != "$EndNodes") {
        reader.fail("$Nodes", "count mismatch: more than " + std::to_string(count) + " node lines");
      }
    } else if (tag == "$Elements") {
      if (!have_format) reader.fail("$Elements", "section appears before $MeshFormat");
      long count = -1;
      {
        std::istringstream cs(reader.require("$Elements"));
        if (!(cs >> count) || count < 0) reader.fail("$Elements", "malformed element count");
      }
      for (long k = 0; k < count; ++k) {
        const std::string l = reader.require("$Elements");
        if (trim(l) == "$EndElements") {
          reader.fail("$Elements",
                      "count mismatch: header says " + std::to_string(count) + ", found " + std::to_string(k));
        }
        std::istringstream es(l);
        long id;
        int type, ntags;
        if (!(es >> id >> type >> ntags) || ntags < 0) reader.fail("$Elements", "malformed element line");
        for (int t = 0; t < ntags; ++t) {
          long dummy;
          if (!(es >> dummy)) reader.fail("$Elements", "malformed element tags");
        }
        if (type == 2) {
          std::array<long, 3> v{};
          if (!(es >> v[0] >> v[1] >> v[2])) reader.fail("$Elements", "triangle with fewer than 3 nodes");
          raw_tris.push_back(v);
        } else if (type == 1 || type == 15) {
          continue;
        } else {
          reader.fail("$Elements", "unsupported element type " + std::to_string(type));
        }
      }
      if (trim(reader.require("$Elements")) != "$EndElements") {
        reader.fail("$Elements", "count mismatch: more than " + std::to_string(count) + " element lines");
      }
    } else if (!tag.empty() && tag[0] == '$') {
      // Unknown section: skip to its end marker.
      const std::string end = "$End" + tag.substr(1);
      std::string l;
      bool closed = false;
      while (reader.next(l)) {
        if (trim(l) == end) {
          closed = true;
          break;
        }
      }
      if (!closed) reader.fail(tag, "missing " + end);
    } else {
      reader.fail("top level", "unexpected content '" + tag + "'");
    }
  }
  if (!have_format) throw ParseError("msh: $MeshFormat: missing header");
  if (raw_tris.empty()) throw ParseError("msh: $Elements: mesh contains no triangles");

  std::unordered_map<long, int> by_id;
  for (std::size_t k = 0; k < node_ids.size(); ++k) {
    if (!by_id.emplace(node_ids[k], static_cast<int>(k)).second) {
      throw ParseError("msh: $Nodes: duplicate node id " + std::to_string(node_ids[k]));
    }
  }
  // Dense re-indexing in $Nodes order, keeping only nodes used by triangles.
  std::vector<int> used(raw_nodes.size(), 0);
  std::vector<std::array<int, 3>> local(raw_tris.size());
  for (std::size_t t = 0; t < raw_tris.size(); ++t) {
    for (int k = 0; k < 3; ++k) {
      auto it = by_id.find(raw_tris[t][k]);
      if (it == by_id.end()) {
        throw ParseError("msh: $Elements: triangle references unknown node " + std::to_string(raw_tris[t][k]));
      }
      local[t][k] = it->second;
      used[it->second] = 1;
    }
  }
  std::vector<int> remap(raw_nodes.size(), -1);
  std::vector<Point> nodes;
  for (std::size_t k = 0; k < raw_nodes.size(); ++k) {
    if (used[k]) {
      remap[k] = static_cast<int>(nodes.size());
      nodes.push_back(raw_nodes[k]);
    }
  }
  std::vector<Triangle> tris;
  tris.reserve(local.size());
  for (const auto& v : local) {
    Triangle tri{remap[v[0]], remap[v[1]], remap[v[2]]};
    if (signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]) < 0.0) std::swap(tri[1], tri[2]);
    tris.push_back(tri);
  }
  return Mesh(std::move(nodes), std::move(tris));
}

Mesh read_msh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_msh(in);
}

void write_msh(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
  out << "$Nodes\n" << mesh.num_nodes() << "\n";
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    out << i + 1 << ' ' << mesh.node(i).x() << ' ' << mesh.node(i).y() << " 0\n";
  }
  out << "$EndNodes\n";
  const auto& bnd = mesh.boundary_edges();
  out << "$Elements\n" << bnd.size() + mesh.triangles().size() << "\n";
  long id = 1;
  for (const auto& e : bnd) out << id++ << " 1 2 1 1 " << e[0] + 1 << ' ' << e[1] + 1 << "\n";
  for (const auto& t : mesh.triangles()) {
    out << id++ << " 2 2 2 1 " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << "\n";
  }
  out << "$EndElements\n";
  if (!out) throw IoError("write failed for " + path.string());
}

Eigen::Vector3d barycentric(const Mesh& mesh, int t, const Point& p) {
  const auto& [a, b, c] = mesh.triangle(t);
  const Point& v0 = mesh.node(a);
  const Eigen::Vector2d e1 = mesh.node(b) - v0;
  const Eigen::Vector2d e2 = mesh.node(c) - v0;
  const Eigen::Vector2d d = p - v0;
  const double det = cross(e1, e2);
  const double l1 = cross(d, e2) / det;
  const double l2 = cross(e1, d) / det;
  return {1.0 - l1 - l2, l1, l2};
}

PointLocator::PointLocator(const Mesh& mesh) : mesh_(&mesh) {
  Eigen::Vector2d lo = mesh.node(0);
  Eigen::Vector2d hi = lo;
  for (const auto& p : mesh.nodes()) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double diameter = (hi - lo).norm();
  tol_ = 1e-10 * diameter;
  const double pad = 2.0 * tol_ + 1e-14;
  lo_ = lo.array() - pad;
  const Eigen::Vector2d extent = (hi - lo).array() + 2.0 * pad;
  const int target = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.num_triangles()))));
  cell_ = std::max(extent.x(), extent.y()) / target;
  nx_ = std::max(1, static_cast<int>(std::ceil(extent.x() / cell_)));
  ny_ = std::max(1, static_cast<int>(std::ceil(extent.y() / cell_)));

  auto cell_range = [&](double lo_c, double hi_c, double origin, int n) {
    const int i0 = std::clamp(static_cast<int>(std::floor((lo_c - origin) / cell_)), 0, n - 1);
    const int i1 = std::clamp(static_cast<int>(std::floor((hi_c - origin) / cell_)), 0, n - 1);
    return std::pair{i0, i1};
  };
  std::vector<std::vector<int>> buckets(static_cast<std::size_t>(nx_) * ny_);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    Eigen::Vector2d blo = mesh.node(tri[0]);
    Eigen::Vector2d bhi = blo;
    for (int k = 1; k < 3; ++k) {
      blo = blo.cwiseMin(mesh.node(tri[k]));
      bhi = bhi.cwiseMax(mesh.node(tri[k]));
    }
    const auto [x0, x1] = cell_range(blo.x() - pad, bhi.x() + pad, lo_.x(), nx_);
    const auto [y0, y1] = cell_range(blo.y() - pad, bhi.y() + pad, lo_.y(), ny_);
    for (int iy = y0; iy <= y1; ++iy)
      for (int ix = x0; ix <= x1; ++ix) buckets[static_cast<std::size_t>(iy) * nx_ + ix].push_back(t);
  }
  cell_offsets_.assign(buckets.size() + 1, 0);
  for (std::size_t c = 0; c < buckets.size(); ++c) {
    cell_offsets_[c + 1] = cell_offsets_[c] + static_cast<int>(buckets[c].size());
  }
  cell_triangles_.reserve(cell_offsets_.back());
  for (const auto& b : buckets) cell_triangles_.insert(cell_triangles_.end(), b.begin(), b.end());
}

bool PointLocator::try_locate(const Point& p, PointLocation& out) const {
  const double fx = std::floor((p.x() - lo_.x()) / cell_);
  const double fy = std::floor((p.y() - lo_.y()) / cell_);
  if (!(fx >= 0 && fy >= 0 && fx < nx_ && fy < ny_)) return false;
  const std::size_t c = static_cast<std::size_t>(fy) * nx_ + static_cast<std::size_t>(fx);
  // Buckets list triangles in increasing index order, so the first hit is the
  // lowest-index containing triangle.
  for (int k = cell_offsets_[c]; k < cell_offsets_[c + 1]; ++k) {
    const int t = cell_triangles_[k];
    const Eigen::Vector3d bc = barycentric(*mesh_, t, p);
    if (bc.minCoeff() >= -tol_) {
      out.triangle_index = t;
      out.barycentric = bc;
      return true;
    }
  }
  return false;
}

PointLocation PointLocator::locate(const Point& p) const {
  PointLocation loc;
  if (!try_locate(p, loc)) {
    std::ostringstream msg;
    msg << std::setprecision(17) << "locate_point: point (" << p.x() << ", " << p.y() << ") lies outside the mesh";
    throw NotFoundError(msg.str());
  }
  return loc;
}

PointLocation PointLocator::locate_clamped(const Point& p, double clamp_distance) const {
  PointLocation loc;
  if (try_locate(p, loc)) return loc;
  const auto& edges = mesh_->boundary_edges();
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_edge = 0;
  Point best_q = p;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Point& a = mesh_->node(edges[e][0]);
    const Point& b = mesh_->node(edges[e][1]);
    const Eigen::Vector2d ab = b - a;
    const double s = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    const Point q = a + s * ab;
    const double d = (p - q).norm();
    if (d < best) {
      best = d;
      best_edge = e;
      best_q = q;
    }
  }
  if (best > clamp_distance) {
    std::ostringstream msg;
    msg << std::setprecision(17) << "locate_point: point (" << p.x() << ", " << p.y() << ") lies " << best
        << " outside the mesh (clamp distance " << clamp_distance << ")";
    throw NotFoundError(msg.str());
  }
  loc.triangle_index = mesh_->boundary_edge_triangles()[best_edge];
  Eigen::Vector3d bc = barycentric(*mesh_, loc.triangle_index, best_q).cwiseMax(0.0);
  bc /= bc.sum();
  loc.barycentric = bc;
  return loc;
}

PointLocation locate_point(const Mesh& mesh, const Point& p) { return PointLocator(mesh).locate(p); }

NodalField interpolate_p1(const Mesh& src_mesh, const NodalField& src_field, const Mesh& dst_mesh) {
  if (src_field.size() != src_mesh.num_nodes()) throw DomainError("interpolate_p1: field size does not match mesh");
  const PointLocator locator(src_mesh);
  const double clamp = src_mesh.h() * src_mesh.h();
  NodalField out(dst_mesh.num_nodes());
  for (int i = 0; i < dst_mesh.num_nodes(); ++i) {
    const PointLocation loc = locator.locate_clamped(dst_mesh.node(i), clamp);
    const auto& tri = src_mesh.triangle(loc.triangle_index);
    out[i] = loc.barycentric[0] * src_field[tri[0]] + loc.barycentric[1] * src_field[tri[1]] +
             loc.barycentric[2] * src_field[tri[2]];
  }
  return out;
}

}  // namespace aet
