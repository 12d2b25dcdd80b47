#pragma once

#include "stvf/fem.hpp"

namespace stvf {

/// Decomposition of the (regularized) total variation energy with the
/// quadratic fidelity term. The boundary trace contribution is identically
/// zero on the zero-trace space but kept as an explicit field.
struct EnergyBreakdown {
    double tv_part = 0.0;        // integral of sqrt(|grad u|^2 + eps^2)
    double fidelity_part = 0.0;  // (lambda/2) ||u - g||_{L2}^2
    double boundary_part = 0.0;  // trace term, zero on this space
    double total = 0.0;
};

/// Exact elementwise evaluation: P1 gradients are constant per cell and the
/// fidelity integrand is quadratic, so no quadrature error enters.
/// eps = 0 is legitimate and yields the exact total variation.
EnergyBreakdown energy(const FeFunction& u, const FeFunction& g, double eps, double lambda);

/// Integral of sqrt(|grad u|^2 + eps^2) alone (the eps-TV part).
double regularized_tv(const FeFunction& u, double eps);

/// Total variation of a piecewise linear field: sum_T |T| |grad u|_T.
double tv_seminorm(const FeFunction& u);

}  // namespace stvf
