#pragma once

#include "aet/error.hpp"
#include "aet/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace aet {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Neumann datum f evaluated at a boundary point.
using BoundaryFlux = std::function<double(const Point&)>;

/// Weighted P1 stiffness: A_ij = sum_T coeff_T |T| grad(phi_i) . grad(phi_j).
/// Throws DomainError naming the first triangle with a nonpositive coefficient.
SparseMatrix assemble_stiffness(const Mesh& mesh, const ElementField& coeff);

/// Half the length of the boundary edges adjacent to each node; zero inside.
NodalField assemble_lumped_boundary_mass(const Mesh& mesh);

/// Row-sum lumped P1 mass, m_i = patch_area(i)/3. With an element mask the
/// triangles outside the mask do not contribute.
NodalField lumped_mass(const Mesh& mesh);
NodalField lumped_mass(const Mesh& mesh, const ElementField& mask);

/// Boundary load b_i = int_Gamma f phi_i (two-point Gauss per edge), shifted by a
/// multiple of the boundary mass so that sum(b) = 0.
NodalField assemble_flux_load(const Mesh& mesh, const BoundaryFlux& f);

/// Vertex average of a nodal field on every triangle.
ElementField nodal_to_element(const Mesh& mesh, const NodalField& field);

/// Per-triangle gradient of a P1 field, one column per triangle.
Eigen::Matrix2Xd element_gradients(const Mesh& mesh, const NodalField& field);

/// b_j = sum_T |T| F_T . grad(phi_j) for a piecewise constant vector field F.
NodalField assemble_gradient_load(const Mesh& mesh, const Eigen::Matrix2Xd& field);

struct CgOptions {
  double tol = 1e-10;  // relative residual ||r|| / ||rhs||
  int maxit = 100;
  // Every n iterations remove the mean from the residual and search direction
  // (kernel = constants); 0 disables.
  int project_constants_every = 0;
  // Optional Jacobi preconditioner (inverse diagonal); empty disables.
  Eigen::VectorXd inv_diagonal;
};

struct CgReport {
  int iterations = 0;
  double residual = 0.0;  // final relative residual
  bool converged = false;
};

struct CgResult {
  Eigen::VectorXd x;
  CgReport report;
};

/// Conjugate gradients for a symmetric positive (semi)definite operator given
/// by `apply(x) -> A x`. Returns after reaching tol or after maxit iterations.
template <class Apply>
CgResult cg_solve(Apply&& apply, const Eigen::VectorXd& rhs, const CgOptions& opts, const Eigen::VectorXd& x0) {
  CgResult res;
  const double rhs_norm = rhs.norm();
  if (!std::isfinite(rhs_norm)) throw SolverError("cg: non-finite right-hand side");
  if (rhs_norm == 0.0) {
    res.x = Eigen::VectorXd::Zero(rhs.size());
    res.report.converged = true;
    return res;
  }
  const bool precond = opts.inv_diagonal.size() == rhs.size();
  auto project = [](Eigen::VectorXd& v) { v.array() -= v.mean(); };

  res.x = x0.size() == rhs.size() ? x0 : Eigen::VectorXd::Zero(rhs.size());
  Eigen::VectorXd r = rhs - apply(res.x);
  Eigen::VectorXd z = precond ? Eigen::VectorXd(opts.inv_diagonal.cwiseProduct(r)) : r;
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  double rel = r.norm() / rhs_norm;
  if (!std::isfinite(rel)) throw SolverError("cg: non-finite initial residual");
  int it = 0;
  while (rel > opts.tol && it < opts.maxit) {
    const Eigen::VectorXd ap = apply(p);
    const double pap = p.dot(ap);
    if (!std::isfinite(pap)) throw SolverError("cg: divergence (non-finite curvature) at iteration " + std::to_string(it));
    if (pap <= 0.0) break;
    const double alpha = rz / pap;
    res.x.noalias() += alpha * p;
    r.noalias() -= alpha * ap;
    ++it;
    if (opts.project_constants_every > 0 && it % opts.project_constants_every == 0) project(r);
    rel = r.norm() / rhs_norm;
    if (!std::isfinite(rel)) throw SolverError("cg: divergence (non-finite residual) at iteration " + std::to_string(it));
    if (rel <= opts.tol) break;
    if (precond) {
      z = opts.inv_diagonal.cwiseProduct(r);
    } else {
      z = r;
    }
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    if (opts.project_constants_every > 0 && it % opts.project_constants_every == 0) project(p);
    rz = rz_new;
  }
  res.report = {it, rel, rel <= opts.tol};
  return res;
}

struct SolverOptions {
  double tol = 1e-10;
  int maxit = 0;  // 0 selects 10 * sqrt(ndofs)
  bool jacobi = false;
};

int default_maxit(int ndofs);

struct NeumannResult {
  NodalField u;
  CgReport report;
};

/// Solves K u = b for the pure Neumann stiffness K (kernel = constants), then
/// shifts u so that sum_i m_i u_i = 0. Requires sum(b) = 0.
NeumannResult solve_neumann(const SparseMatrix& K, const NodalField& b, const NodalField& boundary_mass,
                            const SolverOptions& opts = {});

}  // namespace aet
