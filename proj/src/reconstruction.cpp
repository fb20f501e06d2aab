#include "aet/reconstruction.hpp"

#include "aet/error.hpp"
#include "aet/functionals.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

namespace aet {

namespace {

// Runs fn(j) for j in [0, n) on up to `threads` threads. Callers write
// results into per-j slots, so the outcome does not depend on scheduling.
template <class Fn>
void for_each_dataset(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t j = 0; j < n; ++j) fn(j);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(threads));
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t j = w; j < n; j += workers) {
          try {
            fn(j);
          } catch (...) {
            errors[j] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void check_in_box(const NodalField& sigma, const ReconConfig& config) {
  for (int i = 0; i < sigma.size(); ++i) {
    if (!(sigma[i] >= config.box_low && sigma[i] <= config.box_high)) {
      throw DomainError("sigma outside admissible box at node " + std::to_string(i));
    }
  }
}

}  // namespace

void ReconConfig::validate() const {
  auto fail = [](const std::string& what) { throw DomainError("recon config: " + what); };
  if (!(beta > 0.0)) fail("beta must be positive");
  if (!(eps > 0.0)) fail("eps must be positive");
  if (!(box_low > 0.0 && box_low <= box_high)) fail("require 0 < box_low <= box_high");
  if (outer_iters < 1 || inner_iters < 1 || cg_iters < 1) fail("iteration counts must be >= 1");
  if (delta && !(*delta >= 0.0)) fail("delta must be nonnegative");
  if (!(warm_start_factor >= 0.0)) fail("warm_start_factor must be nonnegative");
  if (!(stop_tol_outer >= 0.0 && stop_tol_inner >= 0.0)) fail("stopping tolerances must be nonnegative");
  if (!(solver_tol > 0.0)) fail("solver_tol must be positive");
  if (threads < 1) fail("threads must be >= 1");
}

std::vector<ForwardSolution> solve_forward_all(const Mesh& mesh, const NodalField& sigma,
                                               const std::vector<Dataset>& datasets, const ReconConfig& config) {
  std::vector<ForwardSolution> out(datasets.size());
  for_each_dataset(datasets.size(), config.threads, [&](std::size_t j) {
    out[j] = solve_forward(mesh, sigma, datasets[j].flux, config.box(), config.solver());
  });
  return out;
}

ObjectiveParts objective(const Mesh& mesh, const std::vector<ForwardSolution>& forward,
                         const std::vector<Dataset>& datasets, double beta) {
  ObjectiveParts parts;
  for (std::size_t j = 0; j < datasets.size(); ++j) {
    parts.fit += integrate_abs(mesh, forward[j].H - datasets[j].z, 0.0, &datasets[j].mask);
  }
  parts.tv = forward.empty() ? 0.0 : tv_seminorm(mesh, forward.front().sigma);
  parts.value = parts.fit + beta * parts.tv;
  return parts;
}

ObjectiveParts objective(const Mesh& mesh, const NodalField& sigma, const std::vector<Dataset>& datasets,
                         const ReconConfig& config) {
  check_in_box(sigma, config);
  const auto forward = solve_forward_all(mesh, sigma, datasets, config);
  ObjectiveParts parts = objective(mesh, forward, datasets, config.beta);
  if (datasets.empty()) {
    parts.tv = tv_seminorm(mesh, sigma);
    parts.value = config.beta * parts.tv;
  }
  return parts;
}

ObjectiveParts objective_smoothed(const Mesh& mesh, const std::vector<ForwardSolution>& forward,
                                  const std::vector<Dataset>& datasets, double beta, double eps) {
  ObjectiveParts parts;
  for (std::size_t j = 0; j < datasets.size(); ++j) {
    parts.fit += integrate_abs(mesh, forward[j].H - datasets[j].z, eps, &datasets[j].mask);
  }
  parts.tv = forward.empty() ? 0.0 : tv_smoothed(mesh, forward.front().sigma, eps);
  parts.value = parts.fit + beta * parts.tv;
  return parts;
}

Weights compute_weights(const NodalField& residual, const ElementField& grad_norm, double eps) {
  if (!(eps > 0.0)) throw DomainError("compute_weights: eps must be positive");
  const double eps2 = eps * eps;
  Weights out;
  out.w = (residual.array().square() + eps2).sqrt().inverse().matrix();
  out.w0 = (grad_norm.array().square() + eps2).sqrt().inverse().matrix();
  return out;
}

NormalOperator::NormalOperator(const std::vector<ForwardSolution>& forward, std::vector<NodalField> data_weights,
                               SparseMatrix K_w0, double beta, double delta, int threads)
    : forward_(&forward),
      data_weights_(std::move(data_weights)),
      K_w0_(std::move(K_w0)),
      beta_(beta),
      delta_(delta),
      threads_(threads) {
  if (data_weights_.size() != forward.size()) throw DomainError("NormalOperator: one weight vector per dataset");
}

Eigen::VectorXd NormalOperator::operator()(const Eigen::VectorXd& kappa) const {
  const auto& forward = *forward_;
  std::vector<Eigen::VectorXd> parts(forward.size());
  for_each_dataset(forward.size(), threads_, [&](std::size_t j) {
    try {
      const NodalField jk = linearized_forward(forward[j], kappa);
      parts[j] = linearized_transpose(forward[j], data_weights_[j].cwiseProduct(jk));
    } catch (const SolverError& e) {
      throw SolverError(std::string(e.what()) + " (dataset " + std::to_string(j) + ")");
    }
  });
  Eigen::VectorXd out = beta_ * (K_w0_ * kappa) + delta_ * kappa;
  for (const auto& p : parts) out += p;
  return out;
}

Eigen::VectorXd NormalOperator::data_transpose(const std::vector<NodalField>& y) const {
  const auto& forward = *forward_;
  std::vector<Eigen::VectorXd> parts(forward.size());
  for_each_dataset(forward.size(), threads_, [&](std::size_t j) {
    parts[j] = linearized_transpose(forward[j], data_weights_[j].cwiseProduct(y[j]));
  });
  Eigen::VectorXd out = Eigen::VectorXd::Zero(K_w0_.rows());
  for (const auto& p : parts) out += p;
  return out;
}

Eigen::VectorXd apply_normal_operator(const std::vector<ForwardSolution>& forward, const NodalField& kappa,
                                      const std::vector<NodalField>& w, const SparseMatrix& K_w0, double beta,
                                      double delta, const std::vector<ElementField>& masks) {
  if (w.size() != forward.size() || masks.size() != forward.size()) {
    throw DomainError("apply_normal_operator: one weight and mask per dataset");
  }
  std::vector<NodalField> dw;
  for (std::size_t j = 0; j < forward.size(); ++j) dw.push_back(lumped_mass(*forward[j].mesh, masks[j]).cwiseProduct(w[j]));
  return NormalOperator(forward, std::move(dw), K_w0, beta, delta)(kappa);
}

StepResult solve_linearized_step(const Mesh& mesh, const std::vector<ForwardSolution>& forward,
                                 const std::vector<NodalField>& residual_data, const std::vector<ElementField>& masks,
                                 const NodalField& sigma, const NodalField& kappa_prev, const ReconConfig& config) {
  const std::size_t n = forward.size();
  if (residual_data.size() != n || masks.size() != n) {
    throw DomainError("solve_linearized_step: one residual and mask per dataset");
  }
  const bool cold = kappa_prev.isZero(0.0);

  // Weights frozen at kappa_prev.
  std::vector<NodalField> data_weights(n);
  for_each_dataset(n, config.threads, [&](std::size_t j) {
    NodalField r = -residual_data[j];
    if (!cold) r += linearized_forward(forward[j], kappa_prev);
    const Weights wj = compute_weights(r, ElementField::Zero(0), config.eps);
    data_weights[j] = lumped_mass(mesh, masks[j]).cwiseProduct(wj.w);
  });
  const Eigen::Matrix2Xd grad = element_gradients(mesh, sigma + kappa_prev);
  const Weights tvw = compute_weights(NodalField::Zero(0), grad.colwise().norm().transpose(), config.eps);
  SparseMatrix K_w0 = assemble_stiffness(mesh, tvw.w0);

  double delta = 0.0;
  if (config.delta) {
    delta = *config.delta;
  } else {
    double data_scale = 0.0;
    for (std::size_t j = 0; j < n; ++j) data_scale += data_weights[j].cwiseProduct(forward[j].grad_sq.cwiseAbs2()).mean();
    delta = 1e-10 * (config.beta * K_w0.diagonal().mean() + data_scale);
  }

  const Eigen::VectorXd K_sigma = K_w0 * sigma;
  NormalOperator op(forward, std::move(data_weights), std::move(K_w0), config.beta, delta, config.threads);
  const Eigen::VectorXd rhs = op.data_transpose(residual_data) - config.beta * K_sigma;

  CgOptions cg;
  cg.tol = config.stop_tol_inner;
  cg.maxit = config.cg_iters;
  CgResult res = cg_solve(op, rhs, cg, config.warm_start_factor * kappa_prev);
  return {std::move(res.x), res.report, delta};
}

ReconResult reconstruct(const Mesh& mesh, const std::vector<Dataset>& datasets, const NodalField& sigma0,
                        const ReconConfig& config, const NodalField* truth) {
  config.validate();
  if (datasets.empty()) throw DomainError("reconstruct: no datasets");
  if (sigma0.size() != mesh.num_nodes()) throw DomainError("reconstruct: sigma0 size does not match mesh");
  for (const auto& d : datasets) {
    if (d.z.size() != mesh.num_nodes() || d.mask.size() != mesh.num_triangles()) {
      throw DomainError("reconstruct: dataset does not live on the reconstruction mesh");
    }
  }
  check_in_box(sigma0, config);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  ReconResult result;
  NodalField sigma = sigma0;
  std::vector<ElementField> masks;
  for (const auto& d : datasets) masks.push_back(d.mask);

  std::vector<ForwardSolution> forward = solve_forward_all(mesh, sigma, datasets, config);
  result.history.initial = objective(mesh, forward, datasets, config.beta);
  if (truth) result.history.initial_errors = error_metrics(mesh, sigma, *truth);

  for (int k = 1; k <= config.outer_iters; ++k) {
    const auto start = std::chrono::steady_clock::now();
    HistoryRow row;
    row.k = k;
    try {
      std::vector<NodalField> residual(datasets.size());
      for (std::size_t j = 0; j < datasets.size(); ++j) residual[j] = datasets[j].z - forward[j].H;

      NodalField kappa_prev = NodalField::Zero(mesh.num_nodes());
      for (int i = 0; i < config.inner_iters; ++i) {
        StepResult step = solve_linearized_step(mesh, forward, residual, masks, sigma, kappa_prev, config);
        row.cg.push_back(step.report);
        const double size = integrate_abs(mesh, step.kappa);
        const double change = integrate_abs(mesh, step.kappa - kappa_prev);
        kappa_prev = std::move(step.kappa);
        if (size == 0.0 || change <= config.stop_tol_inner * size) break;
      }

      const NodalField updated = (sigma + kappa_prev).cwiseMax(config.box_low).cwiseMin(config.box_high);
      row.update_norm = integrate_abs(mesh, updated - sigma);
      sigma = updated;
      forward = solve_forward_all(mesh, sigma, datasets, config);
    } catch (const Error& e) {
      throw SolverError("reconstruct: outer iteration " + std::to_string(k) + ": " + e.what());
    }

    const ObjectiveParts parts = objective(mesh, forward, datasets, config.beta);
    row.J_beta = parts.value;
    row.fit = parts.fit;
    row.tv = parts.tv;
    if (truth) {
      const ErrorTriple e = error_metrics(mesh, sigma, *truth);
      row.e_L1 = e.e_L1;
      row.e_TV = e.e_TV;
      row.e_dBV = e.e_dBV;
    } else {
      row.e_L1 = row.e_TV = row.e_dBV = nan;
    }
    if (config.record_time) {
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    const double update = row.update_norm;
    result.history.rows.push_back(std::move(row));
    if (update <= config.stop_tol_outer * integrate_abs(mesh, sigma)) break;
  }
  result.sigma = std::move(sigma);
  return result;
}

}  // namespace aet
