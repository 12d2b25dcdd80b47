#include "stvf/scheme.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "stvf/energy.hpp"

namespace stvf {

void SchemeParams::validate() const {
    if (!(eps >= 1e-12 && eps <= 1.0))
        throw std::invalid_argument("SchemeParams: eps must lie in [1e-12, 1]");
    if (delta < 0.0) throw std::invalid_argument("SchemeParams: delta must be >= 0");
    if (lambda < 0.0) throw std::invalid_argument("SchemeParams: lambda must be >= 0");
    if (!(T > 0.0)) throw std::invalid_argument("SchemeParams: T must be positive");
    if (N < 1) throw std::invalid_argument("SchemeParams: N must be >= 1");
    if (!(newton_abs_tol > 0.0)) throw std::invalid_argument("SchemeParams: newton_abs_tol must be positive");
    if (newton_max_iter < 1) throw std::invalid_argument("SchemeParams: newton_max_iter must be >= 1");
    if (!(linear_rel_tol > 0.0 && linear_rel_tol <= 1e-6))
        throw std::invalid_argument("SchemeParams: linear_rel_tol must lie in (0, 1e-6]");
    if (tau() > 0.5)
        std::cerr << "warning: tau = " << tau()
                  << " exceeds 1/2; scheme-difference estimates assume tau <= 1/2\n";
}

ProblemData make_problem_data(std::shared_ptr<const FeSpace> space, const FieldSpec& x0_desc,
                              const FieldSpec& g_desc, int quad_order) {
    const FieldFrame frame = FieldFrame::from_mesh(space->mesh());
    ProblemData data;
    data.x0 = l2_project(space, make_scalar_field(x0_desc, frame), quad_order);
    data.g = l2_project(space, make_scalar_field(g_desc, frame), quad_order);
    data.x0_desc = x0_desc;
    data.g_desc = g_desc;
    return data;
}

Stepper::Stepper(std::shared_ptr<const FeSpace> space, const SchemeParams& params)
    : space_(std::move(space)), params_(params) {
    params_.validate();
    mass_ = assemble_mass(*space_);
    const double tau = params_.tau();
    jacobian_fixed_ = mass_;
    Eigen::Map<Vector> fixed(jacobian_fixed_.valuePtr(), jacobian_fixed_.nonZeros());
    fixed *= 1.0 + tau * params_.lambda;
    if (params_.delta > 0.0) {
        stiffness_ = assemble_stiffness(*space_);
        // mass and stiffness share the space's pattern, so the value arrays align
        fixed += tau * params_.delta *
                 Eigen::Map<const Vector>(stiffness_.valuePtr(), stiffness_.nonZeros());
    }
    llt_ = std::make_unique<Eigen::SimplicialLLT<SparseSpdMatrix>>();
    llt_->analyzePattern(space_->pattern());
}

void Stepper::residual(const Vector& v, const Vector& forcing, Vector& out,
                       Vector& tv_work) const {
    const double tau = params_.tau();
    out = (1.0 + tau * params_.lambda) * (mass_ * v);
    if (params_.delta > 0.0) out += tau * params_.delta * (stiffness_ * v);
    if (params_.tv_term_enabled) {
        tv_residual_into(*space_, FeFunction{space_, v}, params_.eps, tv_work);
        out += tau * tv_work;
    }
    out -= forcing;
}

double Stepper::merit(const Vector& v, const Vector& x_prev, const Vector& g_h,
                      double dW) const {
    const double tau = params_.tau();
    const Vector dv = v - (1.0 + dW) * x_prev;
    double phi = 0.5 * dv.dot(mass_ * dv);
    if (params_.delta > 0.0) phi += 0.5 * tau * params_.delta * v.dot(stiffness_ * v);
    if (params_.tv_term_enabled)
        phi += tau * regularized_tv(FeFunction{space_, v}, params_.eps);
    if (params_.lambda > 0.0) {
        const Vector dg = v - g_h;
        phi += 0.5 * tau * params_.lambda * dg.dot(mass_ * dg);
    }
    return phi;
}

Vector Stepper::step(const Vector& x_prev, const Vector& g_h, double dW, StepDiagnostics& diag,
                     const Vector* initial_guess) {
    const double tau = params_.tau();
    const int n = space_->n_dofs();
    if (x_prev.size() != n || g_h.size() != n)
        throw std::invalid_argument("step: coefficient size mismatch");

    // Constant part of the residual: (1+dW) M x_prev + tau lambda M g.
    Vector forcing = (1.0 + dW) * (mass_ * x_prev);
    if (params_.lambda > 0.0) forcing += tau * params_.lambda * (mass_ * g_h);
    const double target =
        params_.newton_abs_tol * (1.0 + (mass_ * x_prev).lpNorm<Eigen::Infinity>());

    Vector v = initial_guess ? *initial_guess : x_prev;
    Vector F(n), tv_work(n), direction(n), trial(n), F_trial(n);
    SparseSpdMatrix J = space_->pattern();
    Eigen::Map<Vector> jvals(J.valuePtr(), J.nonZeros());
    const Eigen::Map<const Vector> jfixed(jacobian_fixed_.valuePtr(),
                                          jacobian_fixed_.nonZeros());

    residual(v, forcing, F, tv_work);
    double res_inf = F.lpNorm<Eigen::Infinity>();
    diag.dW = dW;
    for (int it = 0; it < params_.newton_max_iter; ++it) {
        if (!std::isfinite(res_inf))
            throw NumericalError("step: residual is not finite", res_inf);
        if (res_inf <= target) {
            diag.newton_iters = it;
            diag.residual_inf = res_inf;
            return v;
        }

        if (params_.tv_term_enabled) {
            tv_jacobian_values(*space_, FeFunction{space_, v}, params_.eps, jvals);
            jvals = jfixed + tau * jvals;
        } else {
            jvals = jfixed;
        }

        // Newton direction; the cached symbolic factorization makes the
        // sparse Cholesky the cheap default, CG handles larger systems.
        if (n <= 5000) {
            llt_->factorize(J);
            if (llt_->info() != Eigen::Success)
                throw NumericalError("step: Cholesky factorization of the Newton system failed",
                                     res_inf);
            direction = llt_->solve(-F);
        } else {
            direction = solve_spd(J, -F, params_.linear_rel_tol);
        }

        // Backtracking on the convex merit; grad(merit) = F.
        const double phi0 = merit(v, x_prev, g_h, dW);
        const double slope = F.dot(direction);
        double alpha = 1.0;
        for (int ls = 0; ls < 60; ++ls) {
            trial = v + alpha * direction;
            if (merit(trial, x_prev, g_h, dW) <= phi0 + 1e-4 * alpha * slope) break;
            alpha *= 0.5;
            if (alpha < 1e-14)
                throw NumericalError("step: line search stagnated", res_inf);
        }
        v = trial;
        residual(v, forcing, F, tv_work);
        res_inf = F.lpNorm<Eigen::Infinity>();
    }
    if (res_inf <= target) {
        diag.newton_iters = params_.newton_max_iter;
        diag.residual_inf = res_inf;
        return v;
    }
    throw NumericalError("step: Newton did not converge within " +
                             std::to_string(params_.newton_max_iter) +
                             " iterations, residual " + std::to_string(res_inf),
                         res_inf);
}

FeFunction step(std::shared_ptr<const FeSpace> space, const SchemeParams& params,
                const FeFunction& g_h, const FeFunction& x_prev, double dW,
                StepDiagnostics* diag, const FeFunction* initial_guess) {
    if (g_h.space.get() != space.get() || x_prev.space.get() != space.get())
        throw std::invalid_argument("step: functions must live on the given space");
    Stepper stepper(space, params);
    StepDiagnostics local;
    const Vector* guess = initial_guess ? &initial_guess->coeffs : nullptr;
    Vector x = stepper.step(x_prev.coeffs, g_h.coeffs, dW, local, guess);
    if (diag) *diag = local;
    return FeFunction{std::move(space), std::move(x)};
}

void run_streaming(Stepper& stepper, const ProblemData& data,
                   std::span<const double> increments, const StepObserver& observe) {
    if (static_cast<int>(increments.size()) != stepper.params().N)
        throw std::invalid_argument("run_streaming: increment count must equal N");
    if (data.x0.space.get() != &stepper.space() || data.g.space.get() != &stepper.space())
        throw std::invalid_argument("run_streaming: data must live on the stepper's space");

    Vector x_prev = data.x0.coeffs;
    for (int i = 1; i <= stepper.params().N; ++i) {
        StepDiagnostics diag;
        Vector x;
        try {
            x = stepper.step(x_prev, data.g.coeffs, increments[i - 1], diag);
        } catch (const NumericalError& err) {
            throw NumericalError("time step " + std::to_string(i) + ": " + err.what(),
                                 err.residual());
        }
        observe(i, x_prev, x, diag);
        x_prev = std::move(x);
    }
}

Trajectory run_trajectory(std::shared_ptr<const FeSpace> space, const SchemeParams& params,
                          const ProblemData& data, std::span<const double> increments) {
    Stepper stepper(space, params);
    Trajectory traj;
    traj.space = space;
    traj.params = params;
    traj.increments.assign(increments.begin(), increments.end());
    traj.states.reserve(params.N + 1);
    traj.states.push_back(data.x0.coeffs);
    traj.per_step_diagnostics.resize(params.N);
    run_streaming(stepper, data, increments,
                  [&](int i, const Vector&, const Vector& x, const StepDiagnostics& diag) {
                      traj.states.push_back(x);
                      traj.per_step_diagnostics[i - 1] = diag;
                  });
    return traj;
}

FeFunction interpolant_value(const Trajectory& traj, double t, InterpolantSide side) {
    const int N = traj.params.N;
    const double tau = traj.params.tau();
    if (t < 0.0 || t > traj.params.T)
        throw std::invalid_argument("interpolant_value: t outside [0, T]");

    int i;
    if (side == InterpolantSide::right) {
        // smallest i with t <= t_i
        i = static_cast<int>(std::ceil(t / tau));
        i = std::clamp(i, 0, N);
        while (i > 0 && (i - 1) * tau >= t) --i;
        while (i < N && i * tau < t) ++i;
    } else {
        // largest i with t_i <= t
        i = static_cast<int>(std::floor(t / tau));
        i = std::clamp(i, 0, N);
        while (i < N && (i + 1) * tau <= t) ++i;
        while (i > 0 && i * tau > t) --i;
    }
    return traj.state(i);
}

double spacetime_l2_diff(const Trajectory& traj_a, const Trajectory& traj_b) {
    return spacetime_l2_diff(traj_a, traj_b, assemble_mass(*traj_b.space));
}

double spacetime_l2_diff(const Trajectory& traj_a, const Trajectory& traj_b,
                         const SparseSpdMatrix& mass_fine) {
    const int Na = traj_a.params.N, Nb = traj_b.params.N;
    if (Nb % Na != 0)
        throw std::invalid_argument("spacetime_l2_diff: fine step count must be a multiple of the coarse one");
    if (traj_a.params.T != traj_b.params.T)
        throw std::invalid_argument("spacetime_l2_diff: trajectories must share the final time");
    const bool same_space = traj_a.space.get() == traj_b.space.get();
    if (!same_space &&
        !is_refinement_descendant(traj_b.space->mesh(), traj_a.space->mesh()))
        throw std::invalid_argument("spacetime_l2_diff: trajectory b must live on the same mesh "
                                    "or a refinement descendant of trajectory a's mesh");

    const double tau_b = traj_b.params.tau();
    double sum = 0.0;
    int cached_i = -1;
    Vector coarse_on_fine;
    for (int k = 1; k <= Nb; ++k) {
        // index of the coarse right-continuous interpolant on (t_{k-1}, t_k]
        const int i = (k * Na + Nb - 1) / Nb;
        if (i != cached_i) {
            if (same_space) {
                coarse_on_fine = traj_a.states[i];
            } else {
                coarse_on_fine =
                    prolong(FeFunction{traj_a.space, traj_a.states[i]}, traj_b.space).coeffs;
            }
            cached_i = i;
        }
        const Vector d = coarse_on_fine - traj_b.states[k];
        sum += tau_b * d.dot(mass_fine * d);
    }
    return std::sqrt(sum);
}

}  // namespace stvf
