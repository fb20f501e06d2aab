#pragma once

#include "aet/mesh.hpp"

namespace aet {

/// Exact total variation of a P1 field: sum_T |T| |grad sigma_T|.
double tv_seminorm(const Mesh& mesh, const NodalField& sigma);

/// sum_T |T| sqrt(|grad sigma_T|^2 + eps^2).
double tv_smoothed(const Mesh& mesh, const NodalField& sigma, double eps);

/// int |f| dx for a P1 field using the three edge midpoints of every triangle
/// (weights |T|/3). When eps > 0, |.| is replaced by sqrt(.^2 + eps^2). An
/// optional 0/1 element mask restricts the domain of integration.
double integrate_abs(const Mesh& mesh, const NodalField& f, double eps = 0.0, const ElementField* mask = nullptr);

}  // namespace aet
