#include "aet/metrics.hpp"

#include "aet/error.hpp"
#include "aet/functionals.hpp"

#include <cmath>

namespace aet {

ErrorTriple error_metrics(const Mesh& mesh, const NodalField& sigma, const NodalField& truth) {
  if (sigma.size() != truth.size()) throw DomainError("error_metrics: field sizes differ");
  ErrorTriple e;
  e.e_L1 = integrate_abs(mesh, sigma - truth);
  e.e_TV = std::abs(tv_seminorm(mesh, sigma) - tv_seminorm(mesh, truth));
  e.e_dBV = e.e_L1 + e.e_TV;
  return e;
}

}  // namespace aet
