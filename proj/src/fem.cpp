#include "aet/fem.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace aet {

SparseMatrix assemble_stiffness(const Mesh& mesh, const ElementField& coeff) {
  if (coeff.size() != mesh.num_triangles()) throw DomainError("assemble_stiffness: coefficient size mismatch");
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(9 * static_cast<std::size_t>(mesh.num_triangles()));
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (!(coeff[t] > 0.0) || !std::isfinite(coeff[t])) {
      throw DomainError("assemble_stiffness: nonpositive coefficient on triangle " + std::to_string(t));
    }
    const auto& g = mesh.basis_gradients(t);
    const Eigen::Matrix3d local = (coeff[t] * mesh.area(t)) * (g.transpose() * g);
    const auto& tri = mesh.triangle(t);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) triplets.emplace_back(tri[a], tri[b], local(a, b));
  }
  SparseMatrix K(mesh.num_nodes(), mesh.num_nodes());
  K.setFromTriplets(triplets.begin(), triplets.end());
  K.makeCompressed();
  return K;
}

NodalField assemble_lumped_boundary_mass(const Mesh& mesh) {
  NodalField m = NodalField::Zero(mesh.num_nodes());
  for (const auto& [a, b] : mesh.boundary_edges()) {
    const double half = 0.5 * (mesh.node(a) - mesh.node(b)).norm();
    m[a] += half;
    m[b] += half;
  }
  return m;
}

NodalField lumped_mass(const Mesh& mesh) { return mesh.patch_areas() / 3.0; }

NodalField lumped_mass(const Mesh& mesh, const ElementField& mask) {
  if (mask.size() != mesh.num_triangles()) throw DomainError("lumped_mass: mask size mismatch");
  NodalField m = NodalField::Zero(mesh.num_nodes());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double w = mask[t] * mesh.area(t) / 3.0;
    for (int v : mesh.triangle(t)) m[v] += w;
  }
  return m;
}

NodalField assemble_flux_load(const Mesh& mesh, const BoundaryFlux& f) {
  // Two-point Gauss on [0, 1].
  const double g0 = 0.5 - 0.5 / std::sqrt(3.0);
  const double g1 = 0.5 + 0.5 / std::sqrt(3.0);
  NodalField b = NodalField::Zero(mesh.num_nodes());
  for (const auto& [i, j] : mesh.boundary_edges()) {
    const Point& pa = mesh.node(i);
    const Point& pb = mesh.node(j);
    const double len = (pb - pa).norm();
    for (double s : {g0, g1}) {
      const double fv = f(pa + s * (pb - pa));
      b[i] += 0.5 * len * fv * (1.0 - s);
      b[j] += 0.5 * len * fv * s;
    }
  }
  const NodalField m = assemble_lumped_boundary_mass(mesh);
  b -= (b.sum() / m.sum()) * m;
  return b;
}

ElementField nodal_to_element(const Mesh& mesh, const NodalField& field) {
  ElementField out(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& [a, b, c] = mesh.triangle(t);
    out[t] = (field[a] + field[b] + field[c]) / 3.0;
  }
  return out;
}

Eigen::Matrix2Xd element_gradients(const Mesh& mesh, const NodalField& field) {
  Eigen::Matrix2Xd out(2, mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& [a, b, c] = mesh.triangle(t);
    const auto& g = mesh.basis_gradients(t);
    // Difference form, exactly zero for constant fields.
    out.col(t) = g.col(1) * (field[b] - field[a]) + g.col(2) * (field[c] - field[a]);
  }
  return out;
}

NodalField assemble_gradient_load(const Mesh& mesh, const Eigen::Matrix2Xd& field) {
  NodalField b = NodalField::Zero(mesh.num_nodes());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Eigen::Vector3d local = mesh.area(t) * (mesh.basis_gradients(t).transpose() * field.col(t));
    const auto& tri = mesh.triangle(t);
    for (int k = 0; k < 3; ++k) b[tri[k]] += local[k];
  }
  return b;
}

int default_maxit(int ndofs) { return std::max(1, static_cast<int>(std::ceil(10.0 * std::sqrt(ndofs)))); }

NeumannResult solve_neumann(const SparseMatrix& K, const NodalField& b, const NodalField& boundary_mass,
                            const SolverOptions& opts) {
  CgOptions cg;
  cg.tol = opts.tol;
  cg.maxit = opts.maxit > 0 ? opts.maxit : default_maxit(static_cast<int>(b.size()));
  cg.project_constants_every = 20;
  if (opts.jacobi) cg.inv_diagonal = K.diagonal().cwiseInverse();
  auto apply = [&K](const Eigen::VectorXd& x) -> Eigen::VectorXd { return K * x; };
  CgResult res = cg_solve(apply, b, cg, Eigen::VectorXd::Zero(b.size()));
  NeumannResult out{std::move(res.x), res.report};
  const double shift = boundary_mass.dot(out.u) / boundary_mass.sum();
  out.u.array() -= shift;
  return out;
}

}  // namespace aet
