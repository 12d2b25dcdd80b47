#include "stvf/energy.hpp"

#include <cmath>
#include <stdexcept>

namespace stvf {

EnergyBreakdown energy(const FeFunction& u, const FeFunction& g, double eps, double lambda) {
    if (u.space.get() != g.space.get())
        throw std::invalid_argument("energy: u and g must live on the same space");
    if (eps < 0.0 || lambda < 0.0)
        throw std::invalid_argument("energy: eps and lambda must be nonnegative");

    EnergyBreakdown e;
    const FeSpace& sp = *u.space;
    const int npc = sp.nodes_per_cell();
    const int dim = sp.mesh().dim;
    for (std::size_t c = 0; c < sp.cells().size(); ++c) {
        const FeSpace::CellData& cd = sp.cells()[c];
        std::array<double, 2> grad{0.0, 0.0};
        std::array<double, 3> d{0.0, 0.0, 0.0};  // nodal values of u - g
        for (int k = 0; k < npc; ++k) {
            if (cd.dof[k] < 0) continue;
            const double uv = u.coeffs[cd.dof[k]];
            grad[0] += uv * cd.grad[k][0];
            grad[1] += uv * cd.grad[k][1];
            d[k] = uv - g.coeffs[cd.dof[k]];
        }
        e.tv_part += cd.measure * std::sqrt(grad[0] * grad[0] + grad[1] * grad[1] + eps * eps);
        if (lambda > 0.0) {
            // exact element mass rule applied to the P1 difference
            double q = 0.0;
            if (dim == 1) {
                q = (d[0] * d[0] + d[0] * d[1] + d[1] * d[1]) / 3.0;
            } else {
                q = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2] +
                     d[0] * d[1] + d[1] * d[2] + d[0] * d[2]) / 6.0;
            }
            e.fidelity_part += 0.5 * lambda * cd.measure * q;
        }
    }
    e.boundary_part = 0.0;
    e.total = e.tv_part + e.fidelity_part + e.boundary_part;
    return e;
}

double regularized_tv(const FeFunction& u, double eps) {
    if (eps < 0.0) throw std::invalid_argument("regularized_tv: eps must be nonnegative");
    double tv = 0.0;
    for (std::size_t c = 0; c < u.space->cells().size(); ++c) {
        const std::array<double, 2> g = cell_gradient(u, static_cast<int>(c));
        tv += u.space->cells()[c].measure * std::sqrt(g[0] * g[0] + g[1] * g[1] + eps * eps);
    }
    return tv;
}

double tv_seminorm(const FeFunction& u) {
    return regularized_tv(u, 0.0);
}

}  // namespace stvf
