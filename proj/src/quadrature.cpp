#include "stvf/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace stvf {

std::vector<QuadPoint> gauss_legendre_unit(int n_points) {
    if (n_points < 1) throw std::invalid_argument("gauss_legendre_unit: need at least one point");
    // Nodes on [-1,1] by Newton iteration on Legendre polynomials, then
    // mapped to [0,1]. Standard and accurate to machine precision.
    std::vector<QuadPoint> rule(n_points);
    const int n = n_points;
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule[i] = {{0.5 * (1.0 - x), 0.0}, 0.5 * w};
        rule[n - 1 - i] = {{0.5 * (1.0 + x), 0.0}, 0.5 * w};
    }
    return rule;
}

std::vector<QuadPoint> cell_quadrature(const Mesh& mesh, int cell, int order) {
    if (order < 1) throw std::invalid_argument("cell_quadrature: quadrature order must be >= 1");
    const auto line = gauss_legendre_unit(order);
    std::vector<QuadPoint> rule;

    if (mesh.dim == 1) {
        const Point& a = mesh.vertices[mesh.cell_vertex(cell, 0)];
        const Point& b = mesh.vertices[mesh.cell_vertex(cell, 1)];
        const double len = std::abs(b[0] - a[0]);
        rule.reserve(line.size());
        for (const QuadPoint& q : line)
            rule.push_back({{a[0] + (b[0] - a[0]) * q.x[0], 0.0}, q.weight * len});
        return rule;
    }

    // Duffy map of the unit square onto the reference triangle:
    // (u,v) -> (u, v(1-u)), Jacobian (1-u).
    const Point& p0 = mesh.vertices[mesh.cell_vertex(cell, 0)];
    const Point& p1 = mesh.vertices[mesh.cell_vertex(cell, 1)];
    const Point& p2 = mesh.vertices[mesh.cell_vertex(cell, 2)];
    const double area2 = 2.0 * mesh.cell_measure(cell);
    rule.reserve(line.size() * line.size());
    for (const QuadPoint& qu : line) {
        for (const QuadPoint& qv : line) {
            const double u = qu.x[0];
            const double v = qv.x[0] * (1.0 - u);
            const double w = qu.weight * qv.weight * (1.0 - u) * area2;
            const double x = p0[0] + u * (p1[0] - p0[0]) + v * (p2[0] - p0[0]);
            const double y = p0[1] + u * (p1[1] - p0[1]) + v * (p2[1] - p0[1]);
            rule.push_back({{x, y}, w});
        }
    }
    return rule;
}

}  // namespace stvf
