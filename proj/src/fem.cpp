#include "stvf/fem.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "stvf/quadrature.hpp"
#include "stvf/scheme.hpp"

namespace stvf {

namespace {

constexpr double kEpsGuard = 1e-12;

void require_eps(double eps) {
    if (!(eps >= kEpsGuard))
        throw std::invalid_argument("regularized TV form requires eps >= 1e-12");
}

}  // namespace

FeSpace::FeSpace(std::shared_ptr<const Mesh> mesh) : mesh_(std::move(mesh)) {
    if (!mesh_) throw std::invalid_argument("FeSpace: null mesh");
    const Mesh& m = *mesh_;
    vertex_to_dof_.assign(m.n_vertices(), -1);
    for (int v = 0; v < m.n_vertices(); ++v) {
        if (!m.boundary_vertex[v]) {
            vertex_to_dof_[v] = static_cast<int>(interior_dofs_.size());
            interior_dofs_.push_back(v);
        }
    }
    if (interior_dofs_.empty())
        throw std::invalid_argument("FeSpace: mesh has no interior vertex");

    const int npc = m.nodes_per_cell();
    cells_.resize(m.n_cells());
    for (int c = 0; c < m.n_cells(); ++c) {
        CellData& cd = cells_[c];
        cd.measure = m.cell_measure(c);
        cd.vertex = {-1, -1, -1};
        cd.dof = {-1, -1, -1};
        cd.grad = {{{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}}};
        for (int k = 0; k < npc; ++k) {
            cd.vertex[k] = m.cell_vertex(c, k);
            cd.dof[k] = vertex_to_dof_[cd.vertex[k]];
        }
        if (m.dim == 1) {
            const double len = m.vertices[cd.vertex[1]][0] - m.vertices[cd.vertex[0]][0];
            cd.grad[0] = {-1.0 / len, 0.0};
            cd.grad[1] = {1.0 / len, 0.0};
        } else {
            const Point& a = m.vertices[cd.vertex[0]];
            const Point& b = m.vertices[cd.vertex[1]];
            const Point& c2 = m.vertices[cd.vertex[2]];
            const double det = (b[0] - a[0]) * (c2[1] - a[1]) - (b[1] - a[1]) * (c2[0] - a[0]);
            cd.grad[0] = {(b[1] - c2[1]) / det, (c2[0] - b[0]) / det};
            cd.grad[1] = {(c2[1] - a[1]) / det, (a[0] - c2[0]) / det};
            cd.grad[2] = {(a[1] - b[1]) / det, (b[0] - a[0]) / det};
        }
    }

    // One shared sparsity pattern for every assembled form, plus the
    // cell-to-slot scatter map that makes repeated assembly allocation-free.
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(cells_.size() * npc * npc);
    for (const CellData& cd : cells_)
        for (int i = 0; i < npc; ++i)
            for (int j = 0; j < npc; ++j)
                if (cd.dof[i] >= 0 && cd.dof[j] >= 0)
                    trips.emplace_back(cd.dof[i], cd.dof[j], 0.0);
    pattern_.resize(n_dofs(), n_dofs());
    pattern_.setFromTriplets(trips.begin(), trips.end());
    pattern_.makeCompressed();

    cell_entry_slot_.assign(cells_.size() * 9, -1);
    const int* outer = pattern_.outerIndexPtr();
    const auto slot_of = [&](int row, int col) {
        for (int s = outer[col]; s < outer[col + 1]; ++s)
            if (pattern_.innerIndexPtr()[s] == row) return s;
        return -1;
    };
    for (std::size_t c = 0; c < cells_.size(); ++c) {
        const CellData& cd = cells_[c];
        for (int i = 0; i < npc; ++i)
            for (int j = 0; j < npc; ++j)
                if (cd.dof[i] >= 0 && cd.dof[j] >= 0)
                    cell_entry_slot_[(c * 3 + i) * 3 + j] = slot_of(cd.dof[i], cd.dof[j]);
    }
}

FeFunction zero_function(std::shared_ptr<const FeSpace> space) {
    FeFunction f;
    f.coeffs = Vector::Zero(space->n_dofs());
    f.space = std::move(space);
    return f;
}

std::array<double, 2> cell_gradient(const FeFunction& u, int cell) {
    const FeSpace::CellData& cd = u.space->cells()[cell];
    std::array<double, 2> g{0.0, 0.0};
    for (int k = 0; k < u.space->nodes_per_cell(); ++k) {
        if (cd.dof[k] < 0) continue;
        const double v = u.coeffs[cd.dof[k]];
        g[0] += v * cd.grad[k][0];
        g[1] += v * cd.grad[k][1];
    }
    return g;
}

std::array<double, 3> cell_values(const FeFunction& u, int cell) {
    const FeSpace::CellData& cd = u.space->cells()[cell];
    std::array<double, 3> vals{0.0, 0.0, 0.0};
    for (int k = 0; k < u.space->nodes_per_cell(); ++k)
        if (cd.dof[k] >= 0) vals[k] = u.coeffs[cd.dof[k]];
    return vals;
}

namespace {

// Exact P1 element mass matrices.
double local_mass(int dim, double measure, int i, int j) {
    if (dim == 1) return measure / 6.0 * (i == j ? 2.0 : 1.0);
    return measure / 12.0 * (i == j ? 2.0 : 1.0);
}

}  // namespace

SparseSpdMatrix assemble_mass(const FeSpace& space) {
    SparseSpdMatrix M = space.pattern();
    Eigen::Map<Vector> vals(M.valuePtr(), M.nonZeros());
    vals.setZero();
    const int npc = space.nodes_per_cell();
    const int dim = space.mesh().dim;
    for (std::size_t c = 0; c < space.cells().size(); ++c) {
        const FeSpace::CellData& cd = space.cells()[c];
        for (int i = 0; i < npc; ++i)
            for (int j = 0; j < npc; ++j)
                if (cd.dof[i] >= 0 && cd.dof[j] >= 0)
                    vals[space.entry_slot(static_cast<int>(c), i, j)] +=
                        local_mass(dim, cd.measure, i, j);
    }
    return M;
}

SparseSpdMatrix assemble_stiffness(const FeSpace& space) {
    SparseSpdMatrix K = space.pattern();
    Eigen::Map<Vector> vals(K.valuePtr(), K.nonZeros());
    vals.setZero();
    const int npc = space.nodes_per_cell();
    for (std::size_t c = 0; c < space.cells().size(); ++c) {
        const FeSpace::CellData& cd = space.cells()[c];
        for (int i = 0; i < npc; ++i)
            for (int j = 0; j < npc; ++j)
                if (cd.dof[i] >= 0 && cd.dof[j] >= 0)
                    vals[space.entry_slot(static_cast<int>(c), i, j)] +=
                        cd.measure * (cd.grad[i][0] * cd.grad[j][0] + cd.grad[i][1] * cd.grad[j][1]);
    }
    return K;
}

FeFunction l2_project(std::shared_ptr<const FeSpace> space, const ScalarField& f,
                      int quad_order, double rel_tol) {
    if (quad_order < 1) throw std::invalid_argument("l2_project: quadrature order must be >= 1");
    const FeSpace& sp = *space;
    Vector b = Vector::Zero(sp.n_dofs());
    const Mesh& mesh = sp.mesh();
    const int npc = sp.nodes_per_cell();
    for (int c = 0; c < mesh.n_cells(); ++c) {
        const FeSpace::CellData& cd = sp.cells()[c];
        for (const QuadPoint& q : cell_quadrature(mesh, c, quad_order)) {
            const double fv = f(q.x[0], q.x[1]);
            if (fv == 0.0) continue;
            // barycentric values of the local basis at the quad point
            for (int k = 0; k < npc; ++k) {
                if (cd.dof[k] < 0) continue;
                const Point& pk = mesh.vertices[cd.vertex[k]];
                double phi;
                if (mesh.dim == 1) {
                    phi = 1.0 + cd.grad[k][0] * (q.x[0] - pk[0]);
                } else {
                    phi = 1.0 + cd.grad[k][0] * (q.x[0] - pk[0]) + cd.grad[k][1] * (q.x[1] - pk[1]);
                }
                b[cd.dof[k]] += q.weight * fv * phi;
            }
        }
    }
    FeFunction p;
    p.space = space;
    p.coeffs = solve_spd(assemble_mass(sp), b, rel_tol);
    return p;
}

FeFunction l2_project(std::shared_ptr<const FeSpace> space, const FeFunction& f) {
    if (f.space.get() != space.get())
        throw std::invalid_argument(
            "l2_project: FeFunction input must live on the target space "
            "(use prolong for nested spaces, or project the analytic field)");
    return f;  // projection restricted to the space itself is the identity
}

Vector tv_residual(const FeSpace& space, const FeFunction& u, double eps) {
    Vector r;
    tv_residual_into(space, u, eps, r);
    return r;
}

void tv_residual_into(const FeSpace& space, const FeFunction& u, double eps, Vector& out) {
    require_eps(eps);
    out.resize(space.n_dofs());
    out.setZero();
    const int npc = space.nodes_per_cell();
    for (const FeSpace::CellData& cd : space.cells()) {
        std::array<double, 2> g{0.0, 0.0};
        for (int k = 0; k < npc; ++k) {
            if (cd.dof[k] < 0) continue;
            const double v = u.coeffs[cd.dof[k]];
            g[0] += v * cd.grad[k][0];
            g[1] += v * cd.grad[k][1];
        }
        const double s = std::sqrt(g[0] * g[0] + g[1] * g[1] + eps * eps);
        const double fx = g[0] / s, fy = g[1] / s;
        for (int k = 0; k < npc; ++k)
            if (cd.dof[k] >= 0)
                out[cd.dof[k]] += cd.measure * (fx * cd.grad[k][0] + fy * cd.grad[k][1]);
    }
}

SparseSpdMatrix tv_jacobian(const FeSpace& space, const FeFunction& u, double eps) {
    SparseSpdMatrix J = space.pattern();
    tv_jacobian_values(space, u, eps, Eigen::Map<Vector>(J.valuePtr(), J.nonZeros()));
    return J;
}

void tv_jacobian_values(const FeSpace& space, const FeFunction& u, double eps,
                        Eigen::Map<Vector> values) {
    require_eps(eps);
    values.setZero();
    const int npc = space.nodes_per_cell();
    for (std::size_t c = 0; c < space.cells().size(); ++c) {
        const FeSpace::CellData& cd = space.cells()[c];
        std::array<double, 2> g{0.0, 0.0};
        for (int k = 0; k < npc; ++k) {
            if (cd.dof[k] < 0) continue;
            const double v = u.coeffs[cd.dof[k]];
            g[0] += v * cd.grad[k][0];
            g[1] += v * cd.grad[k][1];
        }
        // H(G) = s^{-1} I - s^{-3} G G^T with s = sqrt(|G|^2 + eps^2)
        const double s2 = g[0] * g[0] + g[1] * g[1] + eps * eps;
        const double s = std::sqrt(s2);
        const double a = 1.0 / s;
        const double bcoef = 1.0 / (s2 * s);
        for (int i = 0; i < npc; ++i) {
            if (cd.dof[i] < 0) continue;
            const double gi_g = cd.grad[i][0] * g[0] + cd.grad[i][1] * g[1];
            for (int j = 0; j < npc; ++j) {
                if (cd.dof[j] < 0) continue;
                const double gj_g = cd.grad[j][0] * g[0] + cd.grad[j][1] * g[1];
                const double gij =
                    cd.grad[i][0] * cd.grad[j][0] + cd.grad[i][1] * cd.grad[j][1];
                values[space.entry_slot(static_cast<int>(c), i, j)] +=
                    cd.measure * (a * gij - bcoef * gi_g * gj_g);
            }
        }
    }
}

Vector apply_Adelta(const FeSpace& space, const FeFunction& u, const SchemeParams& params,
                    const FeFunction& g_n) {
    if (params.delta < 0.0 || params.lambda < 0.0)
        throw std::invalid_argument("apply_Adelta: delta and lambda must be nonnegative");
    Vector r = tv_residual(space, u, params.eps);
    if (params.delta > 0.0) r += params.delta * (assemble_stiffness(space) * u.coeffs);
    if (params.lambda > 0.0)
        r += params.lambda * (assemble_mass(space) * (u.coeffs - g_n.coeffs));
    return r;
}

Vector solve_spd(const SparseSpdMatrix& A, const Vector& b, double rel_tol) {
    if (!(rel_tol > 0.0 && rel_tol <= 1e-6))
        throw std::invalid_argument("solve_spd: rel_tol must lie in (0, 1e-6]");
    if (A.rows() != A.cols() || A.rows() != b.size())
        throw std::invalid_argument("solve_spd: dimension mismatch");
    const double norm_b = b.norm();
    if (norm_b == 0.0) return Vector::Zero(b.size());

    Eigen::ConjugateGradient<SparseSpdMatrix, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(rel_tol);
    cg.setMaxIterations(10 * A.rows());
    cg.compute(A);
    Vector x = cg.solve(b);
    double residual = (A * x - b).norm();
    if (residual <= rel_tol * norm_b) return x;

    if (A.rows() <= 5000) {
        Eigen::SimplicialLLT<SparseSpdMatrix> llt(A);
        if (llt.info() == Eigen::Success) {
            x = llt.solve(b);
            residual = (A * x - b).norm();
            if (residual <= rel_tol * norm_b) return x;
        }
    }
    throw NumericalError("solve_spd: iteration cap exceeded and direct fallback failed, "
                         "relative residual " + std::to_string(residual / norm_b),
                         residual);
}

FeFunction prolong(const FeFunction& coarse, std::shared_ptr<const FeSpace> fine_space) {
    const Mesh& fine_mesh = fine_space->mesh();
    const Mesh& coarse_mesh = coarse.space->mesh();
    if (!is_refinement_descendant(fine_mesh, coarse_mesh))
        throw std::invalid_argument("prolong: fine mesh is not a refinement descendant of the coarse mesh");

    // Chain of meshes from coarse to fine.
    std::vector<const Mesh*> chain;
    for (const Mesh* m = &fine_mesh; m != &coarse_mesh; m = m->parent.get()) chain.push_back(m);
    std::reverse(chain.begin(), chain.end());

    // Full per-vertex values, boundary zeros included; midpoint vertices take
    // the average of their parent edge endpoints (exact for piecewise linear).
    std::vector<double> values(coarse_mesh.n_vertices(), 0.0);
    for (int d = 0; d < coarse.space->n_dofs(); ++d)
        values[coarse.space->interior_dofs()[d]] = coarse.coeffs[d];
    for (const Mesh* m : chain) {
        std::vector<double> next(m->n_vertices(), 0.0);
        for (int v = 0; v < m->n_vertices(); ++v) {
            const auto& par = m->vertex_parents[v];
            next[v] = (par[1] < 0) ? values[par[0]] : 0.5 * (values[par[0]] + values[par[1]]);
        }
        values = std::move(next);
    }

    FeFunction out;
    out.coeffs = Vector::Zero(fine_space->n_dofs());
    for (int d = 0; d < fine_space->n_dofs(); ++d)
        out.coeffs[d] = values[fine_space->interior_dofs()[d]];
    out.space = std::move(fine_space);
    return out;
}

namespace {

double eval_p1(const FeSpace& sp, const FeFunction& u, int cell, double x, double y) {
    const Mesh& mesh = sp.mesh();
    const FeSpace::CellData& cd = sp.cells()[cell];
    double val = 0.0;
    for (int k = 0; k < sp.nodes_per_cell(); ++k) {
        if (cd.dof[k] < 0) continue;
        const Point& pk = mesh.vertices[cd.vertex[k]];
        const double phi = 1.0 + cd.grad[k][0] * (x - pk[0]) + cd.grad[k][1] * (y - pk[1]);
        val += u.coeffs[cd.dof[k]] * phi;
    }
    return val;
}

}  // namespace

double l2_error(const FeFunction& u, const ScalarField& f, int quad_order) {
    const FeSpace& sp = *u.space;
    const Mesh& mesh = sp.mesh();
    double err2 = 0.0;
    for (int c = 0; c < mesh.n_cells(); ++c) {
        for (const QuadPoint& q : cell_quadrature(mesh, c, quad_order)) {
            const double d = eval_p1(sp, u, c, q.x[0], q.x[1]) - f(q.x[0], q.x[1]);
            err2 += q.weight * d * d;
        }
    }
    return std::sqrt(err2);
}

double h1_semi_error(const FeFunction& u, const VectorField& grad_f, int quad_order) {
    const FeSpace& sp = *u.space;
    const Mesh& mesh = sp.mesh();
    double err2 = 0.0;
    for (int c = 0; c < mesh.n_cells(); ++c) {
        const std::array<double, 2> g = cell_gradient(u, c);
        for (const QuadPoint& q : cell_quadrature(mesh, c, quad_order)) {
            const std::array<double, 2> gf = grad_f(q.x[0], q.x[1]);
            const double dx = g[0] - gf[0], dy = g[1] - gf[1];
            err2 += q.weight * (dx * dx + dy * dy);
        }
    }
    return std::sqrt(err2);
}

void write_fefunction(std::ostream& out, const FeFunction& u) {
    out << u.n_dofs() << '\n';
    char buf[64];
    for (int d = 0; d < u.n_dofs(); ++d) {
        std::snprintf(buf, sizeof(buf), "%d %.17g\n", u.space->interior_dofs()[d], u.coeffs[d]);
        out << buf;
    }
}

}  // namespace stvf
