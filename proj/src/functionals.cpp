#include "aet/functionals.hpp"

#include "aet/error.hpp"
#include "aet/fem.hpp"

#include <cmath>

namespace aet {

double tv_seminorm(const Mesh& mesh, const NodalField& sigma) { return tv_smoothed(mesh, sigma, 0.0); }

double tv_smoothed(const Mesh& mesh, const NodalField& sigma, double eps) {
  if (sigma.size() != mesh.num_nodes()) throw DomainError("tv: field size does not match mesh");
  const double eps2 = eps * eps;
  double sum = 0.0;
  const Eigen::Matrix2Xd g = element_gradients(mesh, sigma);
  for (int t = 0; t < mesh.num_triangles(); ++t) sum += mesh.area(t) * std::sqrt(g.col(t).squaredNorm() + eps2);
  return sum;
}

double integrate_abs(const Mesh& mesh, const NodalField& f, double eps, const ElementField* mask) {
  if (f.size() != mesh.num_nodes()) throw DomainError("integrate_abs: field size does not match mesh");
  if (mask && mask->size() != mesh.num_triangles()) throw DomainError("integrate_abs: mask size mismatch");
  const double eps2 = eps * eps;
  auto smooth_abs = [eps2](double v) { return eps2 > 0.0 ? std::sqrt(v * v + eps2) : std::abs(v); };
  double sum = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mask && (*mask)[t] == 0.0) continue;
    const auto& [a, b, c] = mesh.triangle(t);
    const double q = smooth_abs(0.5 * (f[a] + f[b])) + smooth_abs(0.5 * (f[b] + f[c])) + smooth_abs(0.5 * (f[c] + f[a]));
    sum += (mask ? (*mask)[t] : 1.0) * mesh.area(t) / 3.0 * q;
  }
  return sum;
}

}  // namespace aet
