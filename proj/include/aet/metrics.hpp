#pragma once

#include "aet/mesh.hpp"

namespace aet {

struct ErrorTriple {
  double e_L1 = 0.0;
  double e_TV = 0.0;
  double e_dBV = 0.0;  // e_L1 + e_TV
};

/// L1 distance, total-variation gap and their sum (the d_BV metric).
ErrorTriple error_metrics(const Mesh& mesh, const NodalField& sigma, const NodalField& truth);

}  // namespace aet
