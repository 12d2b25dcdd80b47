#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "stvf/mesh.hpp"

namespace stvf {

using SparseSpdMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;
using ScalarField = std::function<double(double, double)>;
using VectorField = std::function<std::array<double, 2>(double, double)>;

/// Thrown when an iterative or direct solve cannot meet its contract.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

/// Continuous piecewise linear space with zero boundary values.
/// Degrees of freedom are the interior vertices of the mesh.
class FeSpace {
public:
    struct CellData {
        double measure;
        std::array<std::array<double, 2>, 3> grad;  // gradient of local basis k
        std::array<int, 3> vertex;                  // global vertex indices
        std::array<int, 3> dof;                     // interior dof index or -1
    };

    explicit FeSpace(std::shared_ptr<const Mesh> mesh);

    const Mesh& mesh() const { return *mesh_; }
    const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
    int n_dofs() const { return static_cast<int>(interior_dofs_.size()); }
    const std::vector<int>& interior_dofs() const { return interior_dofs_; }
    int dof_of_vertex(int v) const { return vertex_to_dof_[v]; }
    const std::vector<CellData>& cells() const { return cells_; }
    int nodes_per_cell() const { return mesh_->nodes_per_cell(); }

    /// Compressed sparsity pattern of the interior-dof vertex adjacency,
    /// shared by mass, stiffness and the TV Jacobian. `cell_entry_slot`
    /// maps (cell, local i, local j) to a value slot of that pattern.
    const SparseSpdMatrix& pattern() const { return pattern_; }
    int entry_slot(int cell, int i, int j) const {
        return cell_entry_slot_[(cell * 3 + i) * 3 + j];
    }

private:
    std::shared_ptr<const Mesh> mesh_;
    std::vector<int> interior_dofs_;
    std::vector<int> vertex_to_dof_;
    std::vector<CellData> cells_;
    SparseSpdMatrix pattern_;
    std::vector<int> cell_entry_slot_;
};

/// Nodal coefficients at the interior vertices of a FeSpace; the function
/// vanishes on the boundary by construction.
struct FeFunction {
    std::shared_ptr<const FeSpace> space;
    Vector coeffs;

    int n_dofs() const { return static_cast<int>(coeffs.size()); }
    bool is_finite() const { return coeffs.allFinite(); }
};

FeFunction zero_function(std::shared_ptr<const FeSpace> space);

/// Constant gradient of u on a cell.
std::array<double, 2> cell_gradient(const FeFunction& u, int cell);

/// Nodal values of u on a cell, boundary vertices contributing zero.
std::array<double, 3> cell_values(const FeFunction& u, int cell);

SparseSpdMatrix assemble_mass(const FeSpace& space);
SparseSpdMatrix assemble_stiffness(const FeSpace& space);

/// L2 projection onto the space: solves M p = (f, phi_u). For FeFunction
/// input on the same space this is the identity.
FeFunction l2_project(std::shared_ptr<const FeSpace> space, const ScalarField& f,
                      int quad_order = 4, double rel_tol = 1e-12);
FeFunction l2_project(std::shared_ptr<const FeSpace> space, const FeFunction& f);

/// Residual vector of the regularized total variation form:
/// entry u = sum_T |T| grad(u)|_T . G_T / sqrt(|G_T|^2 + eps^2).
/// Exact: the integrand is constant per cell. Requires eps >= 1e-12.
Vector tv_residual(const FeSpace& space, const FeFunction& u, double eps);
void tv_residual_into(const FeSpace& space, const FeFunction& u, double eps, Vector& out);

/// Analytic derivative of tv_residual; symmetric positive semidefinite.
SparseSpdMatrix tv_jacobian(const FeSpace& space, const FeFunction& u, double eps);
void tv_jacobian_values(const FeSpace& space, const FeFunction& u, double eps,
                        Eigen::Map<Vector> values);

struct SchemeParams;  // defined in scheme.hpp

/// Weak-form vector of the viscous regularized operator:
/// delta (grad u, grad v) + (f_eps(grad u), grad v) + lambda (u - g, v).
Vector apply_Adelta(const FeSpace& space, const FeFunction& u, const SchemeParams& params,
                    const FeFunction& g_n);

/// Solve A x = b for SPD A: diagonally preconditioned CG with an iteration
/// cap of 10 n, falling back to a sparse Cholesky factorization for
/// n <= 5000. Guarantees ||Ax-b|| <= rel_tol ||b|| or throws NumericalError.
Vector solve_spd(const SparseSpdMatrix& A, const Vector& b, double rel_tol);

/// Exact representation of a coarse-space function on a space whose mesh
/// is a refinement descendant of the coarse mesh (linear interpolation at
/// the vertices introduced by refinement).
FeFunction prolong(const FeFunction& coarse, std::shared_ptr<const FeSpace> fine_space);

/// Quadrature-based errors against an analytic field (test/report helper).
double l2_error(const FeFunction& u, const ScalarField& f, int quad_order = 6);
double h1_semi_error(const FeFunction& u, const VectorField& grad_f, int quad_order = 6);

/// FeFunction dump: `n_dofs` line, then one `vertex_index value` line per dof.
void write_fefunction(std::ostream& out, const FeFunction& u);

}  // namespace stvf
