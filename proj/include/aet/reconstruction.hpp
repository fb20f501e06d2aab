#pragma once

#include "aet/fem.hpp"
#include "aet/forward.hpp"
#include "aet/mesh.hpp"
#include "aet/metrics.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace aet {

struct ReconConfig {
  double beta = 3.5e-2;
  double eps = 1e-4;
  double box_low = 0.2;
  double box_high = 1.5;
  int outer_iters = 50;
  int inner_iters = 3;
  int cg_iters = 3;
  // Stabilization added to the normal operator; unset selects
  // 1e-10 * (mean diagonal of beta K_w0 + data-term diagonal estimate).
  std::optional<double> delta;
  double warm_start_factor = 1.0;
  double stop_tol_outer = 1e-4;
  double stop_tol_inner = 1e-3;
  double solver_tol = 1e-10;
  int solver_maxit = 0;
  bool jacobi = false;
  std::uint64_t seed = 0;
  int threads = 1;
  // When false the history records 0 seconds so that reruns are byte-identical.
  bool record_time = true;

  // Throws DomainError on violated invariants.
  void validate() const;
  ConductivityBox box() const { return {box_low, box_high}; }
  SolverOptions solver() const { return {solver_tol, solver_maxit, jacobi}; }
};

struct Dataset {
  int flux_index = 0;
  BoundaryFlux flux;
  NodalField z;
  ElementField mask;  // 1 where data is available
};

struct ObjectiveParts {
  double value = 0.0;  // fit + beta * tv
  double fit = 0.0;
  double tv = 0.0;
};

struct HistoryRow {
  int k = 0;
  double J_beta = 0.0;
  double fit = 0.0;
  double tv = 0.0;
  double e_L1 = 0.0;
  double e_TV = 0.0;
  double e_dBV = 0.0;
  double update_norm = 0.0;
  double seconds = 0.0;
  std::vector<CgReport> cg;  // one per inner pass
};

struct ReconHistory {
  ObjectiveParts initial;
  std::optional<ErrorTriple> initial_errors;
  std::vector<HistoryRow> rows;
};

struct ReconResult {
  NodalField sigma;
  ReconHistory history;
};

std::vector<ForwardSolution> solve_forward_all(const Mesh& mesh, const NodalField& sigma,
                                               const std::vector<Dataset>& datasets, const ReconConfig& config);

/// sum_j int mask_j |H_j - z_j| + beta TV(sigma), from precomputed forward solutions.
ObjectiveParts objective(const Mesh& mesh, const std::vector<ForwardSolution>& forward,
                         const std::vector<Dataset>& datasets, double beta);
ObjectiveParts objective(const Mesh& mesh, const NodalField& sigma, const std::vector<Dataset>& datasets,
                         const ReconConfig& config);

/// Same functional with both absolute values replaced by |.|_eps.
ObjectiveParts objective_smoothed(const Mesh& mesh, const std::vector<ForwardSolution>& forward,
                                  const std::vector<Dataset>& datasets, double beta, double eps);

struct Weights {
  NodalField w;
  ElementField w0;
};

/// w_i = 1/|residual_i|_eps and w0_T = 1/|grad_T|_eps, with |.|_eps = sqrt(.^2 + eps^2).
Weights compute_weights(const NodalField& residual, const ElementField& grad_norm, double eps);

/// kappa -> sum_j J_j^T (m_j w_j J_j kappa) + beta K_w0 kappa + delta kappa, where m_j is
/// the lumped mass restricted to mask_j. Two Neumann solves per dataset.
class NormalOperator {
 public:
  NormalOperator(const std::vector<ForwardSolution>& forward, std::vector<NodalField> data_weights,
                 SparseMatrix K_w0, double beta, double delta, int threads = 1);

  Eigen::VectorXd operator()(const Eigen::VectorXd& kappa) const;

  // sum_j J_j^T (m_j w_j y_j)
  Eigen::VectorXd data_transpose(const std::vector<NodalField>& y) const;

  const SparseMatrix& K_w0() const { return K_w0_; }
  double beta() const { return beta_; }
  double delta() const { return delta_; }

 private:
  const std::vector<ForwardSolution>* forward_;
  std::vector<NodalField> data_weights_;  // m_j * w_j
  SparseMatrix K_w0_;
  double beta_;
  double delta_;
  int threads_;
};

Eigen::VectorXd apply_normal_operator(const std::vector<ForwardSolution>& forward, const NodalField& kappa,
                                      const std::vector<NodalField>& w, const SparseMatrix& K_w0, double beta,
                                      double delta, const std::vector<ElementField>& masks);

struct StepResult {
  NodalField kappa;
  CgReport report;
  double delta = 0.0;
};

/// One reweighted quadratic subproblem: weights from kappa_prev, then CG on
/// the normal system started at warm_start_factor * kappa_prev.
StepResult solve_linearized_step(const Mesh& mesh, const std::vector<ForwardSolution>& forward,
                                 const std::vector<NodalField>& residual_data, const std::vector<ElementField>& masks,
                                 const NodalField& sigma, const NodalField& kappa_prev, const ReconConfig& config);

/// Recursive linearization with iteratively reweighted inner problems. When
/// truth is given the history carries error metrics against it, otherwise NaN.
ReconResult reconstruct(const Mesh& mesh, const std::vector<Dataset>& datasets, const NodalField& sigma0,
                        const ReconConfig& config, const NodalField* truth = nullptr);

}  // namespace aet
