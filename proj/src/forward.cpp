#include "aet/forward.hpp"

#include "aet/error.hpp"

#include <string>

namespace aet {

NodalField recover_nodal(const Mesh& mesh, const ElementField& g) {
  NodalField out = NodalField::Zero(mesh.num_nodes());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double w = mesh.area(t) * g[t];
    for (int v : mesh.triangle(t)) out[v] += w;
  }
  return out.cwiseQuotient(mesh.patch_areas());
}

ForwardSolution solve_forward(const Mesh& mesh, const NodalField& sigma, const BoundaryFlux& flux,
                              const ConductivityBox& box, const SolverOptions& solver) {
  if (sigma.size() != mesh.num_nodes()) throw DomainError("solve_forward: sigma size does not match mesh");
  for (int i = 0; i < sigma.size(); ++i) {
    if (!(sigma[i] >= box.low && sigma[i] <= box.high)) {
      throw DomainError("solve_forward: sigma outside admissible box at node " + std::to_string(i));
    }
  }
  ForwardSolution fs;
  fs.mesh = &mesh;
  fs.sigma = sigma;
  fs.sigma_elem = nodal_to_element(mesh, sigma);
  fs.stiffness = assemble_stiffness(mesh, fs.sigma_elem);
  fs.boundary_mass = assemble_lumped_boundary_mass(mesh);
  fs.solver = solver;
  const NodalField b = assemble_flux_load(mesh, flux);
  NeumannResult sol = solve_neumann(fs.stiffness, b, fs.boundary_mass, solver);
  fs.u = std::move(sol.u);
  fs.report = sol.report;
  fs.grad_u = element_gradients(mesh, fs.u);
  fs.grad_sq = recover_nodal(mesh, fs.grad_u.colwise().squaredNorm().transpose());
  fs.H = sigma.cwiseProduct(fs.grad_sq);
  return fs;
}

namespace {

// Solves (sigma grad w, grad phi) = -(c grad u, grad phi) for element-wise c and
// returns the element field 2 grad u . grad w.
ElementField sensitivity_product(const ForwardSolution& fs, const ElementField& c) {
  const Mesh& mesh = *fs.mesh;
  Eigen::Matrix2Xd flux = fs.grad_u;
  for (int t = 0; t < mesh.num_triangles(); ++t) flux.col(t) *= -c[t];
  const NodalField rhs = assemble_gradient_load(mesh, flux);
  const NeumannResult w = solve_neumann(fs.stiffness, rhs, fs.boundary_mass, fs.solver);
  const Eigen::Matrix2Xd grad_w = element_gradients(mesh, w.u);
  return 2.0 * fs.grad_u.cwiseProduct(grad_w).colwise().sum().transpose();
}

}  // namespace

NodalField linearized_forward(const ForwardSolution& fs, const NodalField& kappa) {
  const Mesh& mesh = *fs.mesh;
  const ElementField dg = sensitivity_product(fs, nodal_to_element(mesh, kappa));
  return kappa.cwiseProduct(fs.grad_sq) + fs.sigma.cwiseProduct(recover_nodal(mesh, dg));
}

NodalField linearized_transpose(const ForwardSolution& fs, const NodalField& y) {
  const Mesh& mesh = *fs.mesh;
  // c_T = sum_{i in T} sigma_i y_i / patch_area(i): transpose of the recovery.
  const NodalField sy = fs.sigma.cwiseProduct(y).cwiseQuotient(mesh.patch_areas());
  ElementField c(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& [a, b, d] = mesh.triangle(t);
    c[t] = sy[a] + sy[b] + sy[d];
  }
  const ElementField dg = sensitivity_product(fs, c);
  NodalField out = y.cwiseProduct(fs.grad_sq);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double w = mesh.area(t) * dg[t] / 3.0;
    for (int v : mesh.triangle(t)) out[v] += w;
  }
  return out;
}

NodalField adjoint_applied(const ForwardSolution& fs, const NodalField& zeta) {
  const NodalField m = lumped_mass(*fs.mesh);
  return linearized_transpose(fs, m.cwiseProduct(zeta)).cwiseQuotient(m);
}

}  // namespace aet
