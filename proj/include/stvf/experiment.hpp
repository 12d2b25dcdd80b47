#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>

#include "stvf/fields.hpp"
#include "stvf/noise.hpp"
#include "stvf/scheme.hpp"

namespace stvf {

/// Mesh construction recipe: a built-in generator over a Domain, or a
/// coarse mesh text file, refined `level` times.
struct MeshSpec {
    Domain domain = Domain::interval(0.0, 1.0);
    std::string mesh_file;  // when set, overrides the generator
    int n_cells = 16;       // 1D generator resolution
    int n_x = 16, n_y = 16;  // 2D generator resolution
    int level = 0;
};

std::shared_ptr<const Mesh> build_mesh(const MeshSpec& spec);

/// A Monte Carlo ensemble plan. Carries the analytic data descriptors (not
/// projected functions) so refinement studies can rebuild the data per level.
struct EnsembleSpec {
    MeshSpec mesh;
    FieldSpec x0_field;
    FieldSpec g_field;
    SchemeParams params;
    int n_paths = 2;
    std::uint64_t seed = 0;
    int threads = 1;
    int quad_order = 4;
    std::uint64_t state_budget_bytes = 2ull << 30;

    void validate() const;
};

struct Stat {
    double mean = 0.0;
    double se = 0.0;  // sample standard deviation / sqrt(n_paths)
};

Stat compute_stat(std::span<const double> values);

/// Monte Carlo estimates; the per-time-index table and the Gronwall bound
/// fields are filled by the energy study only.
struct EnsembleReport {
    int n_paths = 0;
    std::vector<std::string> functional_names;
    std::vector<std::vector<double>> per_path_values;  // [functional][path]
    std::vector<Stat> functional_stats;

    double tau = 0.0;
    std::vector<double> t;
    std::vector<Stat> sq_norm_by_index;
    std::vector<double> cum_energy_by_index;

    int argmax_index = -1;
    double term_max_sq = 0.0, term_incr = 0.0, term_energy = 0.0, term_weighted_sq = 0.0;
    Stat lhs_total;
    double gronwall_bound = 0.0;
    bool bound_pass = false;
};

struct ConvergenceRow {
    int level = 0;
    double h_max = 0.0, tau = 0.0, eps = 0.0, delta = 0.0;
    double diff = 0.0, diff_se = 0.0;
    bool monotone = true;  // diff < previous row's diff
    std::vector<double> extras;
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    std::vector<std::string> extra_columns;
};

/// Generic expectation estimator: runs `n_paths` independent trajectories
/// and records scalar functionals per path. Reduction is in path order, so
/// the result is identical for any thread count.
EnsembleReport run_ensemble(const EnsembleSpec& spec);

/// Energy stability study: Monte Carlo estimate of
///   max_i E||X^i||^2 + 1/4 E[sum ||X^k - X^{k-1}||^2]
///   + tau E[sum J_eps(X^k)] + (tau lambda / 2) E[sum ||X^k||^2]
/// against the explicit Gronwall constant
///   2 (T eps |O| + 1/2 ||x0||_M^2 + T lambda ||g||_M^2) exp(2T).
/// Requires delta = 0; passes when estimate <= bound + 3 SE.
EnsembleReport estimate_energy_bound(const EnsembleSpec& spec);

/// Coupled-path Cauchy study: levels L = 0..n_levels-1 refine the base mesh
/// L times and halve tau L times; every level of a path consumes coarsenings
/// of one fine increment vector. Row L reports
/// sqrt(mean_p spacetime_l2_diff(level L, level L+1)^2).
ConvergenceTable cauchy_study(const EnsembleSpec& base_spec, int n_levels);

/// Viscosity study: per delta > 0, max_i of the mean squared M-norm gap to
/// the coupled delta = 0 run on the same mesh and data. Extra columns carry
/// the discrete H1_0 seminorms of the data.
ConvergenceTable delta_study(const EnsembleSpec& spec, const std::vector<double>& deltas);

/// Data-approximation stability: per (exact, approximate) data pair run
/// coupled paths and report max_i mean gap alongside the driving data
/// distances and their ratio.
ConvergenceTable data_stability_study(
    const EnsembleSpec& spec,
    const std::vector<std::pair<ProblemData, ProblemData>>& data_pairs);

void write_energy_csv(std::ostream& out, const EnsembleReport& report);
void write_convergence_csv(std::ostream& out, const ConvergenceTable& table);

}  // namespace stvf
