#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stvf/fem.hpp"
#include "stvf/fields.hpp"

namespace stvf {

/// Scalar dials of the fully discrete schemes. delta = 0 selects the plain
/// regularized scheme; delta > 0 adds the viscosity term.
struct SchemeParams {
    double eps = 0.1;
    double delta = 0.0;
    double lambda = 0.0;
    double T = 1.0;
    int N = 1;
    double newton_abs_tol = 1e-10;
    int newton_max_iter = 50;
    double linear_rel_tol = 1e-12;
    bool tv_term_enabled = true;  // test hook: false drops the TV term

    double tau() const { return T / N; }

    /// Throws on out-of-range values; warns (stderr) when tau > 1/2, where
    /// the scheme-difference estimates no longer apply.
    void validate() const;
};

/// Projected data of one problem instance plus the analytic descriptors
/// it was built from.
struct ProblemData {
    FeFunction x0;
    FeFunction g;
    FieldSpec x0_desc;
    FieldSpec g_desc;
};

ProblemData make_problem_data(std::shared_ptr<const FeSpace> space, const FieldSpec& x0_desc,
                              const FieldSpec& g_desc, int quad_order = 4);

struct StepDiagnostics {
    int newton_iters = 0;
    double residual_inf = 0.0;
    double dW = 0.0;
};

struct Trajectory {
    std::shared_ptr<const FeSpace> space;
    std::vector<Vector> states;  // X^0 .. X^N
    SchemeParams params;
    std::vector<double> increments;
    std::vector<StepDiagnostics> per_step_diagnostics;

    FeFunction state(int i) const { return FeFunction{space, states[i]}; }
};

/// One implicit step: reusable across steps so the matrices, the shared
/// sparsity pattern and the Cholesky symbolic analysis are built once.
class Stepper {
public:
    Stepper(std::shared_ptr<const FeSpace> space, const SchemeParams& params);

    const FeSpace& space() const { return *space_; }
    const std::shared_ptr<const FeSpace>& space_ptr() const { return space_; }
    const SchemeParams& params() const { return params_; }
    const SparseSpdMatrix& mass() const { return mass_; }

    /// Solves F(v) = M(v - (1+dW) x_prev) + tau delta K v + tau tv_residual(v)
    ///             + tau lambda M(v - g) = 0
    /// by damped Newton on the strictly convex merit whose gradient is F.
    /// Stops at ||F||_inf <= newton_abs_tol (1 + ||M x_prev||_inf).
    /// Throws NumericalError (with the last residual) on non-convergence.
    Vector step(const Vector& x_prev, const Vector& g_h, double dW, StepDiagnostics& diag,
                const Vector* initial_guess = nullptr);

    double merit(const Vector& v, const Vector& x_prev, const Vector& g_h, double dW) const;

private:
    std::shared_ptr<const FeSpace> space_;
    SchemeParams params_;
    SparseSpdMatrix mass_;
    SparseSpdMatrix stiffness_;       // empty unless delta > 0
    SparseSpdMatrix jacobian_fixed_;  // (1 + tau lambda) M + tau delta K
    std::unique_ptr<Eigen::SimplicialLLT<SparseSpdMatrix>> llt_;

    void residual(const Vector& v, const Vector& forcing, Vector& out, Vector& tv_work) const;
};

/// Spec-level convenience around Stepper for a single step.
FeFunction step(std::shared_ptr<const FeSpace> space, const SchemeParams& params,
                const FeFunction& g_h, const FeFunction& x_prev, double dW,
                StepDiagnostics* diag = nullptr, const FeFunction* initial_guess = nullptr);

/// Observer invoked after each accepted step with (i, X^{i-1}, X^i, diag).
using StepObserver =
    std::function<void(int, const Vector&, const Vector&, const StepDiagnostics&)>;

/// Time loop without state storage; observer sees each transition.
/// Errors from individual steps are annotated with the step index.
void run_streaming(Stepper& stepper, const ProblemData& data,
                   std::span<const double> increments, const StepObserver& observe);

Trajectory run_trajectory(std::shared_ptr<const FeSpace> space, const SchemeParams& params,
                          const ProblemData& data, std::span<const double> increments);

enum class InterpolantSide { right, left };

/// Piecewise-constant interpolants of the discrete trajectory:
/// right: X^i on (t_{i-1}, t_i], left: X^{i-1} on [t_{i-1}, t_i).
FeFunction interpolant_value(const Trajectory& traj, double t, InterpolantSide side);

/// Space-time L2 distance of the right-continuous interpolants of two
/// trajectories; traj_b must live on the same mesh or a refinement
/// descendant, with a step count that is a multiple of traj_a's.
double spacetime_l2_diff(const Trajectory& traj_a, const Trajectory& traj_b);
double spacetime_l2_diff(const Trajectory& traj_a, const Trajectory& traj_b,
                         const SparseSpdMatrix& mass_fine);

}  // namespace stvf
