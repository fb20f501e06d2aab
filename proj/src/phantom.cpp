#include "aet/phantom.hpp"

#include "aet/error.hpp"
#include "aet/rng.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace aet {

double GaussianStream::next() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  const double u1 = rng_.uniform();
  const double u2 = rng_.uniform();
  const double radius = std::sqrt(-2.0 * std::log(1.0 - u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_ = radius * std::sin(angle);
  has_cached_ = true;
  return radius * std::cos(angle);
}

BoundaryFlux boundary_flux(int index) {
  const double s = 1.0 / std::numbers::sqrt2;
  switch (index) {
    case 1:
      return [](const Point& p) { return p.x(); };
    case 2:
      return [](const Point& p) { return p.y(); };
    case 3:
      return [s](const Point& p) { return s * (p.x() + p.y()); };
    case 4:
      return [s](const Point& p) { return s * (p.x() - p.y()); };
    default:
      throw DomainError("boundary_flux: index must be in 1..4, got " + std::to_string(index));
  }
}

namespace {

// Tissue conductivities of the layered head model.
constexpr double kAir = 0.4;
constexpr double kScalp = 0.5232;
constexpr double kSkull = 0.2983;
constexpr double kSpinalFluid = 1.0143;
constexpr double kGrayMatter = 0.55946;
constexpr double kWhiteMatter = 0.32404;

bool in_ellipse(const Point& p, double cx, double cy, double ax, double ay) {
  const double dx = (p.x() - cx) / ax;
  const double dy = (p.y() - cy) / ay;
  return dx * dx + dy * dy <= 1.0;
}

double head_value(const Point& p) {
  if (!in_ellipse(p, 0.0, 0.0, 0.86, 0.95)) return kAir;
  if (!in_ellipse(p, 0.0, 0.0, 0.80, 0.89)) return kScalp;
  if (!in_ellipse(p, 0.0, 0.0, 0.74, 0.83)) return kSkull;
  if (!in_ellipse(p, 0.0, 0.0, 0.70, 0.79)) return kSpinalFluid;
  if (in_ellipse(p, -0.12, 0.05, 0.06, 0.18) || in_ellipse(p, 0.12, 0.05, 0.06, 0.18)) return kSpinalFluid;
  if (in_ellipse(p, 0.0, 0.0, 0.52, 0.60)) return kWhiteMatter;
  return kGrayMatter;
}

bool in_triangle(const Point& p, const std::array<Point, 3>& v) {
  auto side = [](const Point& a, const Point& b, const Point& q) {
    return (b.x() - a.x()) * (q.y() - a.y()) - (b.y() - a.y()) * (q.x() - a.x());
  };
  const double s0 = side(v[0], v[1], p);
  const double s1 = side(v[1], v[2], p);
  const double s2 = side(v[2], v[0], p);
  return (s0 >= 0 && s1 >= 0 && s2 >= 0) || (s0 <= 0 && s1 <= 0 && s2 <= 0);
}

double shapes_value(const Point& p) {
  if ((p - Point(-0.35, 0.35)).norm() <= 0.25) return 1.2;
  if (std::abs(p.x() - 0.4) <= 0.2 && std::abs(p.y() - 0.3) <= 0.2) return 0.6;
  static const std::array<Point, 3> tri = [] {
    std::array<Point, 3> v;
    for (int k = 0; k < 3; ++k) {
      const double a = std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * k / 3.0;
      v[k] = Point(0.0, -0.45) + 0.3 * Point(std::cos(a), std::sin(a));
    }
    return v;
  }();
  if (in_triangle(p, tri)) return 0.8;
  return 1.0;
}

}  // namespace

const std::vector<std::string>& phantom_names() {
  static const std::vector<std::string> names{"constant", "shapes", "head"};
  return names;
}

double phantom_value(const std::string& name, const Point& p) {
  if (name == "constant") return 1.0;
  if (name == "shapes") return shapes_value(p);
  if (name == "head") return head_value(p);
  throw DomainError("unknown phantom '" + name + "'");
}

Phantom make_phantom(const std::string& name, const Mesh& mesh) {
  Phantom ph;
  ph.name = name;
  ph.sigma.resize(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i) ph.sigma[i] = phantom_value(name, mesh.node(i));
  if (name == "constant") {
    ph.description = "homogeneous, sigma = 1";
  } else if (name == "shapes") {
    ph.description =
        "background 1.0; disk (-0.35,0.35) r=0.25 -> 1.2; square (0.4,0.3) side 0.4 -> 0.6; "
        "triangle centroid (0,-0.45) circumradius 0.3 -> 0.8";
  } else {
    ph.description =
        "nested ellipses: air 0.4, scalp 0.5232, skull 0.2983, spinal fluid 1.0143 (incl. ventricles), "
        "gray matter 0.55946, white matter 0.32404";
  }
  return ph;
}

NodalField add_noise(const NodalField& H, const NoiseSpec& spec) {
  if (!(spec.delta_e >= 0.0)) throw DomainError("add_noise: delta_e must be nonnegative");
  if (spec.delta_e == 0.0) return H;
  const double h_norm = H.norm();
  if (h_norm == 0.0) throw DomainError("add_noise: relative noise on a zero field");
  GaussianStream gauss(spec.seed);
  NodalField e(H.size());
  for (int i = 0; i < e.size(); ++i) e[i] = gauss.next();
  return H + (spec.delta_e * h_norm / e.norm()) * e;
}

ElementField make_mask(const MaskSpec& spec, const Mesh& mesh) {
  ElementField mask(mesh.num_triangles());
  if (spec.kind == "full") {
    mask.setOnes();
  } else if (spec.kind == "inner_disk") {
    if (!(spec.radius > 0.0)) throw DomainError("make_mask: radius must be positive");
    for (int t = 0; t < mesh.num_triangles(); ++t) mask[t] = mesh.centroid(t).norm() <= spec.radius ? 1.0 : 0.0;
  } else if (spec.kind == "half_disk") {
    for (int t = 0; t < mesh.num_triangles(); ++t) mask[t] = mesh.centroid(t).x() >= 0.0 ? 1.0 : 0.0;
  } else {
    throw DomainError("make_mask: unknown mask kind '" + spec.kind + "'");
  }
  return mask;
}

std::vector<SimulatedDataset> simulate_datasets(const Mesh& phantom_mesh, const Mesh& recon_mesh,
                                                const Phantom& phantom, const std::vector<int>& flux_indices,
                                                const ElementField& mask, const SimulationOptions& options) {
  if (phantom.sigma.size() != phantom_mesh.num_nodes()) {
    throw DomainError("simulate_datasets: phantom does not live on the phantom mesh");
  }
  if (mask.size() != recon_mesh.num_triangles()) throw DomainError("simulate_datasets: mask size mismatch");
  std::vector<SimulatedDataset> out;
  for (std::size_t j = 0; j < flux_indices.size(); ++j) {
    const BoundaryFlux flux = boundary_flux(flux_indices[j]);
    const ForwardSolution fs = solve_forward(phantom_mesh, phantom.sigma, flux, options.box, options.solver);
    const NoiseSpec noise{options.noise.delta_e, options.noise.seed + j};
    NodalField z;
    if (options.noise_stage == NoiseStage::Fine) {
      z = interpolate_p1(phantom_mesh, add_noise(fs.H, noise), recon_mesh);
    } else {
      z = add_noise(interpolate_p1(phantom_mesh, fs.H, recon_mesh), noise);
    }
    SimulatedDataset sd;
    sd.dataset = Dataset{flux_indices[j], flux, std::move(z), mask};
    sd.H_fine = fs.H;
    out.push_back(std::move(sd));
  }
  return out;
}

}  // namespace aet
