#include "aet/error.hpp"
#include "aet/functionals.hpp"
#include "aet/io.hpp"
#include "aet/phantom.hpp"
#include "aet/reconstruction.hpp"

#include "dense_oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace aet;

namespace {

Mesh unit_square() { return Mesh({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2}, {0, 2, 3}}); }

Eigen::VectorXd random_vector(int n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(lo, hi);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = U(rng);
  return v;
}

NodalField coordinate(const Mesh& m, int axis) {
  NodalField x(m.num_nodes());
  for (int i = 0; i < m.num_nodes(); ++i) x[i] = m.node(i)[axis];
  return x;
}

std::vector<Dataset> exact_datasets(const Mesh& m, const NodalField& sigma, const std::vector<int>& fluxes) {
  std::vector<Dataset> out;
  for (int f : fluxes) {
    const BoundaryFlux flux = boundary_flux(f);
    out.push_back({f, flux, solve_forward(m, sigma, flux, {}, {1e-12, 0, false}).H, ElementField::Ones(m.num_triangles())});
  }
  return out;
}

struct SmallProblem {
  Mesh fine = generate_disk_mesh(0.1);
  Mesh recon = generate_disk_mesh(0.2);
  NodalField truth;
  std::vector<Dataset> datasets;

  explicit SmallProblem(double noise) {
    const Phantom ph = make_phantom("shapes", fine);
    SimulationOptions opts;
    opts.noise = {noise, 7};
    for (auto& s : simulate_datasets(fine, recon, ph, {1, 2, 3}, ElementField::Ones(recon.num_triangles()), opts)) {
      datasets.push_back(std::move(s.dataset));
    }
    truth = interpolate_p1(fine, ph.sigma, recon);
  }
};

}  // namespace

TEST_CASE("total variation") {
  const Mesh sq = unit_square();
  CHECK(tv_seminorm(sq, NodalField::Constant(4, 3.0)) == 0.0);
  // Hat function of node 1: gradient (1,-1) on the first triangle only.
  NodalField hat = NodalField::Zero(4);
  hat[1] = 1.0;
  CHECK(tv_seminorm(sq, hat) == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-15));

  const Mesh m = generate_disk_mesh(0.1);
  CHECK(tv_seminorm(m, coordinate(m, 0)) == doctest::Approx(m.total_area()).epsilon(1e-12));
  CHECK(tv_seminorm(m, -2.0 * coordinate(m, 1)) == doctest::Approx(2.0 * m.total_area()).epsilon(1e-12));
}

TEST_CASE("smoothed total variation") {
  const Mesh m = generate_disk_mesh(0.1);
  for (double eps : {1e-2, 1e-4}) {
    CHECK(tv_smoothed(m, NodalField::Constant(m.num_nodes(), 0.7), eps) ==
          doctest::Approx(m.total_area() * eps).epsilon(1e-13));
    CHECK(tv_smoothed(m, coordinate(m, 0), eps) ==
          doctest::Approx(m.total_area() * std::sqrt(1.0 + eps * eps)).epsilon(1e-12));
    for (std::uint64_t s = 0; s < 5; ++s) {
      const NodalField f = random_vector(m.num_nodes(), s);
      const double tv = tv_seminorm(m, f);
      const double tve = tv_smoothed(m, f, eps);
      CHECK(tve >= tv);
      CHECK(tve <= tv + m.total_area() * eps + 1e-12);
    }
  }
}

TEST_CASE("integrate_abs") {
  const Mesh sq = unit_square();
  CHECK(integrate_abs(sq, NodalField::Constant(4, -2.0)) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(integrate_abs(sq, coordinate(sq, 0)) == doctest::Approx(0.5).epsilon(1e-15));
  const ElementField first = Eigen::Vector2d(1.0, 0.0);
  CHECK(integrate_abs(sq, NodalField::Ones(4), 0.0, &first) == doctest::Approx(0.5).epsilon(1e-15));

  const Mesh m = generate_disk_mesh(0.05);
  CHECK(std::abs(integrate_abs(m, coordinate(m, 0)) - 4.0 / 3.0) <= 2.0 * m.h());
  CHECK(integrate_abs(m, NodalField::Zero(m.num_nodes()), 1e-3) == doctest::Approx(m.total_area() * 1e-3).epsilon(1e-12));
}

TEST_CASE("weights") {
  const Weights w = compute_weights(Eigen::Vector3d(0.0, 3.0, -3.0), Eigen::Vector2d(0.0, 4.0), 4.0);
  CHECK(w.w[0] == doctest::Approx(0.25));
  CHECK(w.w[1] == doctest::Approx(0.2));
  CHECK(w.w[2] == doctest::Approx(0.2));
  CHECK(w.w0[0] == doctest::Approx(0.25));
  CHECK(w.w0[1] == doctest::Approx(1.0 / std::sqrt(32.0)));
  CHECK_THROWS_AS(compute_weights(Eigen::Vector3d::Zero(), Eigen::Vector2d::Zero(), 0.0), DomainError);
}

TEST_CASE("objective") {
  const Mesh m = generate_disk_mesh(0.1);
  ReconConfig cfg;
  const NodalField truth = make_phantom("shapes", m).sigma;
  const auto datasets = exact_datasets(m, truth, {1, 2, 3});

  SUBCASE("exact data leaves only the penalty") {
    const ObjectiveParts p = objective(m, truth, datasets, cfg);
    CHECK(p.fit <= 1e-9);
    CHECK(p.tv == doctest::Approx(tv_seminorm(m, truth)));
    CHECK(p.value == doctest::Approx(p.fit + cfg.beta * p.tv));
    MESSAGE("J_beta(sigma*) = " << p.value << ", data residual " << p.fit);
  }

  SUBCASE("constant conductivity has no penalty") {
    const ObjectiveParts p = objective(m, NodalField::Ones(m.num_nodes()), datasets, cfg);
    CHECK(p.tv == 0.0);
    CHECK(p.value == p.fit);
    CHECK(p.fit > 0.0);
  }

  SUBCASE("conductivity outside the box") {
    NodalField bad = truth;
    bad[0] = 2.0;
    CHECK_THROWS_AS(objective(m, bad, datasets, cfg), DomainError);
  }

  SUBCASE("smoothing bound with one dataset") {
    const std::vector<Dataset> one(datasets.begin(), datasets.begin() + 1);
    for (double eps : {1e-2, 1e-4}) {
      for (std::uint64_t s = 0; s < 5; ++s) {
        const NodalField sigma = random_vector(m.num_nodes(), 40 + s, 0.5, 1.4);
        const auto fwd = solve_forward_all(m, sigma, one, cfg);
        const double J = objective(m, fwd, one, cfg.beta).value;
        const double Je = objective_smoothed(m, fwd, one, cfg.beta, eps).value;
        CHECK(Je - J >= 0.0);
        CHECK(Je - J <= 2.0 * m.total_area() * eps);
      }
    }
  }
}

TEST_CASE("normal operator is symmetric and positive") {
  const Mesh m = generate_disk_mesh(0.2);
  const NodalField sigma = random_vector(m.num_nodes(), 50, 0.7, 1.3);
  ReconConfig cfg;
  const auto datasets = exact_datasets(m, sigma, {1, 3});
  const auto fwd = solve_forward_all(m, sigma, datasets, cfg);
  std::vector<NodalField> w;
  std::vector<ElementField> masks;
  for (std::size_t j = 0; j < fwd.size(); ++j) {
    w.push_back(random_vector(m.num_nodes(), 60 + j, 0.5, 2.0));
    masks.push_back(ElementField::Ones(m.num_triangles()));
  }
  const SparseMatrix K_w0 = assemble_stiffness(m, random_vector(m.num_triangles(), 70, 0.5, 2.0));
  const double delta = 1e-3;

  CHECK(apply_normal_operator(fwd, NodalField::Zero(m.num_nodes()), w, K_w0, cfg.beta, delta, masks).isZero(0.0));
  for (std::uint64_t s = 0; s < 5; ++s) {
    const NodalField a = random_vector(m.num_nodes(), 80 + s);
    const NodalField b = random_vector(m.num_nodes(), 90 + s);
    const NodalField Aa = apply_normal_operator(fwd, a, w, K_w0, cfg.beta, delta, masks);
    const NodalField Ab = apply_normal_operator(fwd, b, w, K_w0, cfg.beta, delta, masks);
    CHECK(std::abs(Aa.dot(b) - a.dot(Ab)) <= 1e-8 * std::max(1.0, std::abs(Aa.dot(b))));
    CHECK(a.dot(Aa) >= delta * a.squaredNorm() * (1.0 - 1e-10));
  }
}

TEST_CASE("linearized step matches the dense normal equations") {
  const Mesh m = generate_disk_mesh(0.5);
  REQUIRE(m.num_nodes() <= 30);
  const NodalField sigma = random_vector(m.num_nodes(), 101, 0.8, 1.2);
  const NodalField truth = random_vector(m.num_nodes(), 102, 0.6, 1.4);
  const std::vector<int> fluxes{1, 2, 3};
  const auto datasets = exact_datasets(m, truth, fluxes);
  ReconConfig cfg;
  cfg.cg_iters = 5000;
  cfg.stop_tol_inner = 1e-14;
  cfg.delta = 1e-6;
  cfg.solver_tol = 1e-14;
  const auto fwd = solve_forward_all(m, sigma, datasets, cfg);

  std::vector<NodalField> d;
  std::vector<ElementField> masks;
  for (std::size_t j = 0; j < datasets.size(); ++j) {
    d.push_back(datasets[j].z - fwd[j].H);
    masks.push_back(ElementField::Ones(m.num_triangles()));
  }
  for (const bool warm : {false, true}) {
    CAPTURE(warm);
    const NodalField kappa_prev = warm ? random_vector(m.num_nodes(), 103, -0.1, 0.1) : NodalField::Zero(m.num_nodes());
    const StepResult step = solve_linearized_step(m, fwd, d, masks, sigma, kappa_prev, cfg);

    // Dense assembly of the same quadratic problem.
    const int n = m.num_nodes();
    NodalField mass = NodalField::Zero(n);
    for (int t = 0; t < m.num_triangles(); ++t)
      for (int v : m.triangle(t)) mass[v] += oracle::geometry(m, t).area / 3.0;
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) * *cfg.delta;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (std::size_t j = 0; j < fluxes.size(); ++j) {
      const auto ref = oracle::forward(m, sigma, assemble_flux_load(m, boundary_flux(fluxes[j])));
      const Eigen::VectorXd res = ref.J * kappa_prev - d[j];
      const Eigen::VectorXd mw = mass.array() / (res.array().square() + cfg.eps * cfg.eps).sqrt();
      A += ref.J.transpose() * mw.asDiagonal() * ref.J;
      rhs += ref.J.transpose() * mw.cwiseProduct(d[j]);
    }
    ElementField w0(m.num_triangles());
    const NodalField s = sigma + kappa_prev;
    for (int t = 0; t < m.num_triangles(); ++t) {
      const auto g = oracle::geometry(m, t);
      Eigen::Vector2d grad = Eigen::Vector2d::Zero();
      for (int k = 0; k < 3; ++k) grad += s[m.triangle(t)[k]] * g.grads[k];
      w0[t] = 1.0 / std::sqrt(grad.squaredNorm() + cfg.eps * cfg.eps);
    }
    const Eigen::MatrixXd Kw = oracle::stiffness(m, w0);
    A += cfg.beta * Kw;
    rhs -= cfg.beta * Kw * sigma;
    const Eigen::VectorXd kappa = A.ldlt().solve(rhs);
    CHECK((step.kappa - kappa).norm() <= 1e-8 * kappa.norm());
  }
}

TEST_CASE("linearized step edge cases") {
  const Mesh m = generate_disk_mesh(0.25);
  ReconConfig cfg;
  const NodalField sigma = NodalField::Ones(m.num_nodes());
  const auto datasets = exact_datasets(m, sigma, {1, 2});
  const auto fwd = solve_forward_all(m, sigma, datasets, cfg);
  const std::vector<ElementField> masks(2, ElementField::Ones(m.num_triangles()));

  SUBCASE("no residual and no gradient gives a zero step") {
    const std::vector<NodalField> d(2, NodalField::Zero(m.num_nodes()));
    const StepResult step = solve_linearized_step(m, fwd, d, masks, sigma, NodalField::Zero(m.num_nodes()), cfg);
    CHECK(step.kappa.cwiseAbs().maxCoeff() <= 1e-12);
  }

  SUBCASE("large beta approaches the penalty-only minimizer") {
    NodalField rough = sigma + 0.2 * random_vector(m.num_nodes(), 111);
    const auto fwd_rough = solve_forward_all(m, rough, datasets, cfg);
    std::vector<NodalField> d;
    for (std::size_t j = 0; j < 2; ++j) d.push_back(datasets[j].z - fwd_rough[j].H);
    ReconConfig c = cfg;
    c.eps = 1e-2;
    c.cg_iters = 20000;
    c.stop_tol_inner = 1e-12;
    // Penalty only: K kappa = -K sigma has minimizers -sigma + const.
    const NodalField target = -(rough.array() - rough.mean()).matrix();
    double dist[2];
    int idx = 0;
    for (double beta : {1.0, 1e3}) {
      c.beta = beta;
      const StepResult step = solve_linearized_step(m, fwd_rough, d, masks, rough, NodalField::Zero(m.num_nodes()), c);
      const NodalField centered = (step.kappa.array() - step.kappa.mean()).matrix();
      dist[idx++] = (centered - target).norm() / target.norm();
    }
    MESSAGE("relative distance to the penalty minimizer: beta=1 " << dist[0] << ", beta=1e3 " << dist[1]);
    CHECK(dist[1] < dist[0]);
    CHECK(dist[1] <= 1e-2);
  }

  SUBCASE("mismatched inputs") {
    const std::vector<NodalField> d(1, NodalField::Zero(m.num_nodes()));
    CHECK_THROWS_AS(solve_linearized_step(m, fwd, d, masks, sigma, NodalField::Zero(m.num_nodes()), cfg), DomainError);
  }
}

TEST_CASE("reconstruction keeps a constant truth fixed") {
  const Mesh m = generate_disk_mesh(0.2);
  const NodalField truth = NodalField::Ones(m.num_nodes());
  ReconConfig cfg;
  cfg.outer_iters = 5;
  const ReconResult r = reconstruct(m, exact_datasets(m, truth, {1, 2, 3}), truth, cfg, &truth);
  CHECK((r.sigma - truth).cwiseAbs().maxCoeff() <= 1e-6);
  REQUIRE(!r.history.rows.empty());
  CHECK(r.history.rows.size() == 1);
  CHECK(r.history.rows.back().update_norm <= 1e-6);
}

TEST_CASE("reconstruction on a small noisy problem") {
  const SmallProblem p(0.01);
  ReconConfig cfg;
  cfg.outer_iters = 15;
  cfg.stop_tol_outer = 0.0;
  const NodalField sigma0 = NodalField::Ones(p.recon.num_nodes());
  const ReconResult r = reconstruct(p.recon, p.datasets, sigma0, cfg, &p.truth);
  REQUIRE(r.history.rows.size() == 15);
  CHECK(r.history.rows.back().J_beta < r.history.initial.value);
  REQUIRE(r.history.initial_errors.has_value());
  CHECK(r.history.rows.back().e_L1 < r.history.initial_errors->e_L1);
  for (const auto& row : r.history.rows) {
    CHECK(row.cg.size() >= 1);
    CHECK(row.cg.size() <= static_cast<std::size_t>(cfg.inner_iters));
    CHECK(row.e_dBV == doctest::Approx(row.e_L1 + row.e_TV));
    CHECK(row.J_beta == doctest::Approx(row.fit + cfg.beta * row.tv));
  }
}

TEST_CASE("every iterate stays in the box") {
  const SmallProblem p(0.0);
  ReconConfig cfg;
  cfg.box_low = 0.9;
  cfg.box_high = 1.1;
  cfg.stop_tol_outer = 0.0;
  const NodalField sigma0 = NodalField::Ones(p.recon.num_nodes());
  bool clipped = false;
  for (int k = 1; k <= 4; ++k) {
    cfg.outer_iters = k;
    const ReconResult r = reconstruct(p.recon, p.datasets, sigma0, cfg);
    CHECK(r.sigma.minCoeff() >= cfg.box_low);
    CHECK(r.sigma.maxCoeff() <= cfg.box_high);
    clipped = clipped || r.sigma.minCoeff() == cfg.box_low || r.sigma.maxCoeff() == cfg.box_high;
    CHECK(std::isnan(r.history.rows.back().e_L1));
  }
  CHECK(clipped);
}

TEST_CASE("reconstruction is deterministic and thread-count independent") {
  const SmallProblem p(0.01);
  ReconConfig cfg;
  cfg.outer_iters = 5;
  cfg.record_time = false;
  const NodalField sigma0 = NodalField::Ones(p.recon.num_nodes());
  auto csv = [&](const ReconResult& r) {
    std::ostringstream out;
    write_history(r.history, out);
    return out.str();
  };
  const ReconResult a = reconstruct(p.recon, p.datasets, sigma0, cfg, &p.truth);
  const ReconResult b = reconstruct(p.recon, p.datasets, sigma0, cfg, &p.truth);
  cfg.threads = 3;
  const ReconResult c = reconstruct(p.recon, p.datasets, sigma0, cfg, &p.truth);
  CHECK(csv(a) == csv(b));
  CHECK(csv(a) == csv(c));
  CHECK(a.sigma == c.sigma);
}

TEST_CASE("reconstruction input validation") {
  const Mesh m = generate_disk_mesh(0.25);
  const NodalField ones = NodalField::Ones(m.num_nodes());
  ReconConfig cfg;
  CHECK_THROWS_AS(reconstruct(m, {}, ones, cfg), DomainError);
  const auto ds = exact_datasets(m, ones, {1});
  ReconConfig bad = cfg;
  bad.beta = -1.0;
  CHECK_THROWS_AS(reconstruct(m, ds, ones, bad), DomainError);
  bad = cfg;
  bad.cg_iters = 0;
  CHECK_THROWS_AS(reconstruct(m, ds, ones, bad), DomainError);
  CHECK_THROWS_AS(reconstruct(m, ds, NodalField::Constant(m.num_nodes(), 3.0), cfg), DomainError);
  CHECK_THROWS_AS(reconstruct(m, ds, NodalField::Ones(3), cfg), DomainError);
}
