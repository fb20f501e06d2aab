#pragma once

#include "aet/fem.hpp"
#include "aet/forward.hpp"
#include "aet/mesh.hpp"
#include "aet/reconstruction.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace aet {

/// Boundary fluxes f1 = x1, f2 = x2, f3 = (x1 + x2)/sqrt 2, f4 = (x1 - x2)/sqrt 2.
/// Throws DomainError for an index outside 1..4.
BoundaryFlux boundary_flux(int index);

struct Phantom {
  std::string name;
  NodalField sigma;
  std::string description;
};

// Known phantom names: "constant", "shapes", "head".
const std::vector<std::string>& phantom_names();

/// Conductivity of the named phantom at a point (piecewise constant).
double phantom_value(const std::string& name, const Point& p);

/// Evaluates the phantom at the mesh nodes. Throws DomainError for unknown names.
Phantom make_phantom(const std::string& name, const Mesh& mesh);

struct NoiseSpec {
  double delta_e = 0.0;
  std::uint64_t seed = 0;
};

/// H + delta_e (|H|_2 / |e|_2) e with e standard normal from GaussianStream(seed).
NodalField add_noise(const NodalField& H, const NoiseSpec& spec);

struct MaskSpec {
  std::string kind = "full";  // "full" | "inner_disk" | "half_disk"
  double radius = 0.6;        // inner_disk only
};

/// 1 on triangles whose centroid lies in the region, 0 elsewhere.
ElementField make_mask(const MaskSpec& spec, const Mesh& mesh);

enum class NoiseStage { Fine, Coarse };

struct SimulationOptions {
  NoiseSpec noise;
  // Fine: noise on the fine-mesh H before interpolation (default).
  NoiseStage noise_stage = NoiseStage::Fine;
  ConductivityBox box;
  SolverOptions solver;
};

struct SimulatedDataset {
  Dataset dataset;       // on the reconstruction mesh
  NodalField H_fine;     // noise-free power density on the phantom mesh
};

/// Forward solves on the phantom mesh, noise, then interpolation to the
/// reconstruction mesh. Dataset j uses noise seed spec.seed + j.
std::vector<SimulatedDataset> simulate_datasets(const Mesh& phantom_mesh, const Mesh& recon_mesh,
                                                const Phantom& phantom, const std::vector<int>& flux_indices,
                                                const ElementField& mask, const SimulationOptions& options = {});

}  // namespace aet
