#pragma once

// Shared test utilities: independent oracles (dense factorization, geometric
// point location, brute-force quadrature) that deliberately avoid the library
// code paths they are used to check.

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "stvf/fem.hpp"
#include "stvf/mesh.hpp"

namespace stvf::test {

// Dense Cholesky solve, written out long-hand.
inline std::vector<double> dense_cholesky_solve(std::vector<std::vector<double>> A,
                                                std::vector<double> b) {
    const int n = static_cast<int>(b.size());
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < j; ++k) A[j][j] -= A[j][k] * A[j][k];
        if (A[j][j] <= 0.0) throw std::runtime_error("dense_cholesky_solve: not SPD");
        A[j][j] = std::sqrt(A[j][j]);
        for (int i = j + 1; i < n; ++i) {
            for (int k = 0; k < j; ++k) A[i][j] -= A[i][k] * A[j][k];
            A[i][j] /= A[j][j];
        }
    }
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < i; ++k) b[i] -= A[i][k] * b[k];
        b[i] /= A[i][i];
    }
    for (int i = n - 1; i >= 0; --i) {
        for (int k = i + 1; k < n; ++k) b[i] -= A[k][i] * b[k];
        b[i] /= A[i][i];
    }
    return b;
}

inline bool point_in_cell(const Mesh& mesh, int cell, const Point& p, double tol = 1e-12) {
    if (mesh.dim == 1) {
        const double a = mesh.vertices[mesh.cell_vertex(cell, 0)][0];
        const double b = mesh.vertices[mesh.cell_vertex(cell, 1)][0];
        return p[0] >= std::min(a, b) - tol && p[0] <= std::max(a, b) + tol;
    }
    const Point& a = mesh.vertices[mesh.cell_vertex(cell, 0)];
    const Point& b = mesh.vertices[mesh.cell_vertex(cell, 1)];
    const Point& c = mesh.vertices[mesh.cell_vertex(cell, 2)];
    const double det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    const double l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (p[1] - a[1]) * (c[0] - a[0])) / det;
    const double l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) / det;
    return l1 >= -tol && l2 >= -tol && 1.0 - l1 - l2 >= -tol;
}

// Evaluate a P1 function at a point by brute-force cell search; independent
// of the prolongation machinery.
inline double eval_by_location(const FeFunction& u, const Point& p) {
    const Mesh& mesh = u.space->mesh();
    for (int c = 0; c < mesh.n_cells(); ++c) {
        if (!point_in_cell(mesh, c, p)) continue;
        if (mesh.dim == 1) {
            const int va = mesh.cell_vertex(c, 0), vb = mesh.cell_vertex(c, 1);
            const double xa = mesh.vertices[va][0], xb = mesh.vertices[vb][0];
            const double t = (p[0] - xa) / (xb - xa);
            const int da = u.space->dof_of_vertex(va), db = u.space->dof_of_vertex(vb);
            const double fa = da >= 0 ? u.coeffs[da] : 0.0;
            const double fb = db >= 0 ? u.coeffs[db] : 0.0;
            return (1.0 - t) * fa + t * fb;
        }
        const Point& a = mesh.vertices[mesh.cell_vertex(c, 0)];
        const Point& b = mesh.vertices[mesh.cell_vertex(c, 1)];
        const Point& cc = mesh.vertices[mesh.cell_vertex(c, 2)];
        const double det = (b[0] - a[0]) * (cc[1] - a[1]) - (b[1] - a[1]) * (cc[0] - a[0]);
        const double l1 = ((p[0] - a[0]) * (cc[1] - a[1]) - (p[1] - a[1]) * (cc[0] - a[0])) / det;
        const double l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) / det;
        const double l0 = 1.0 - l1 - l2;
        double val = 0.0;
        const double lam[3] = {l0, l1, l2};
        for (int k = 0; k < 3; ++k) {
            const int d = u.space->dof_of_vertex(mesh.cell_vertex(c, k));
            if (d >= 0) val += lam[k] * u.coeffs[d];
        }
        return val;
    }
    throw std::runtime_error("eval_by_location: point not found in any cell");
}

inline FeFunction random_function(std::shared_ptr<const FeSpace> space, std::mt19937_64& rng,
                                  double scale = 1.0) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    FeFunction f;
    f.coeffs = Vector::NullaryExpr(space->n_dofs(), [&](Eigen::Index) { return dist(rng); });
    f.space = std::move(space);
    return f;
}

// Full vertex-indexed mass/stiffness assembled directly from hand element
// formulas, boundary rows included (test-side counterpart of the reduced
// library assembly).
inline std::vector<std::vector<double>> full_mass_matrix(const Mesh& mesh) {
    const int nv = mesh.n_vertices();
    std::vector<std::vector<double>> M(nv, std::vector<double>(nv, 0.0));
    for (int c = 0; c < mesh.n_cells(); ++c) {
        const double m = mesh.cell_measure(c);
        const int npc = mesh.nodes_per_cell();
        const double diag = mesh.dim == 1 ? m / 3.0 : m / 6.0;
        const double off = mesh.dim == 1 ? m / 6.0 : m / 12.0;
        for (int i = 0; i < npc; ++i)
            for (int j = 0; j < npc; ++j)
                M[mesh.cell_vertex(c, i)][mesh.cell_vertex(c, j)] += (i == j) ? diag : off;
    }
    return M;
}

inline std::vector<std::vector<double>> full_stiffness_matrix(const Mesh& mesh) {
    const int nv = mesh.n_vertices();
    std::vector<std::vector<double>> K(nv, std::vector<double>(nv, 0.0));
    for (int c = 0; c < mesh.n_cells(); ++c) {
        const int npc = mesh.nodes_per_cell();
        double gx[3] = {0, 0, 0}, gy[3] = {0, 0, 0};
        if (mesh.dim == 1) {
            const double len = mesh.vertices[mesh.cell_vertex(c, 1)][0] -
                               mesh.vertices[mesh.cell_vertex(c, 0)][0];
            gx[0] = -1.0 / len;
            gx[1] = 1.0 / len;
        } else {
            const Point& a = mesh.vertices[mesh.cell_vertex(c, 0)];
            const Point& b = mesh.vertices[mesh.cell_vertex(c, 1)];
            const Point& cc = mesh.vertices[mesh.cell_vertex(c, 2)];
            const double det =
                (b[0] - a[0]) * (cc[1] - a[1]) - (b[1] - a[1]) * (cc[0] - a[0]);
            gx[0] = (b[1] - cc[1]) / det;
            gy[0] = (cc[0] - b[0]) / det;
            gx[1] = (cc[1] - a[1]) / det;
            gy[1] = (a[0] - cc[0]) / det;
            gx[2] = (a[1] - b[1]) / det;
            gy[2] = (b[0] - a[0]) / det;
        }
        const double m = mesh.cell_measure(c);
        for (int i = 0; i < npc; ++i)
            for (int j = 0; j < npc; ++j)
                K[mesh.cell_vertex(c, i)][mesh.cell_vertex(c, j)] +=
                    m * (gx[i] * gx[j] + gy[i] * gy[j]);
    }
    return K;
}

}  // namespace stvf::test
