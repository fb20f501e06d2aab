#pragma once

#include "aet/fem.hpp"
#include "aet/mesh.hpp"

namespace aet {

struct ConductivityBox {
  double low = 0.2;
  double high = 1.5;
};

/// State of the power density forward map at one conductivity and one flux.
///
/// H_i = sigma_i r_i, where r is the area-weighted patch average of |grad u|^2.
/// The mesh must outlive the solution.
struct ForwardSolution {
  const Mesh* mesh = nullptr;
  NodalField sigma;
  ElementField sigma_elem;
  SparseMatrix stiffness;
  NodalField boundary_mass;
  NodalField u;
  Eigen::Matrix2Xd grad_u;
  NodalField grad_sq;  // r: recovered |grad u|^2
  NodalField H;
  SolverOptions solver;
  CgReport report;
};

// Patch recovery: out_i = sum_{T ni i} |T| g_T / sum_{T ni i} |T|.
NodalField recover_nodal(const Mesh& mesh, const ElementField& g);

/// Discrete forward problem (sigma grad u, grad chi) = <f, chi> with zero
/// boundary mean. Throws DomainError if sigma leaves the box.
ForwardSolution solve_forward(const Mesh& mesh, const NodalField& sigma, const BoundaryFlux& flux,
                              const ConductivityBox& box = {}, const SolverOptions& solver = {});

/// Derivative H'(sigma)[kappa]. Costs one Neumann solve.
NodalField linearized_forward(const ForwardSolution& fs, const NodalField& kappa);

/// Euclidean transpose of the discrete derivative: <H' kappa, y> = <kappa, J^T y>
/// for the plain dot product. Costs one Neumann solve.
NodalField linearized_transpose(const ForwardSolution& fs, const NodalField& y);

/// Adjoint of H'(sigma) in the lumped-mass inner product <a, b>_M = sum m_i a_i b_i:
/// H'* zeta = zeta |grad u|^2 + R(2 grad u . grad v) with
/// (sigma grad v, grad phi) = -(avg(sigma zeta) grad u, grad phi).
NodalField adjoint_applied(const ForwardSolution& fs, const NodalField& zeta);

}  // namespace aet
