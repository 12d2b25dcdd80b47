#include "stvf/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "stvf/energy.hpp"

namespace stvf {

std::shared_ptr<const Mesh> build_mesh(const MeshSpec& spec) {
    std::shared_ptr<const Mesh> mesh;
    if (!spec.mesh_file.empty()) {
        mesh = read_mesh_text_file(spec.mesh_file);
    } else if (spec.domain.dim == 1) {
        mesh = uniform_interval_mesh(spec.domain, spec.n_cells);
    } else {
        mesh = structured_triangle_mesh(spec.domain, spec.n_x, spec.n_y);
    }
    for (int l = 0; l < spec.level; ++l) mesh = refine(mesh);
    return mesh;
}

void EnsembleSpec::validate() const {
    params.validate();
    if (n_paths < 2)
        throw std::invalid_argument("EnsembleSpec: n_paths must be >= 2 (standard errors need variance)");
    if (threads < 1) throw std::invalid_argument("EnsembleSpec: threads must be >= 1");
    if (quad_order < 1) throw std::invalid_argument("EnsembleSpec: quad_order must be >= 1");
    if (mesh.level < 0) throw std::invalid_argument("EnsembleSpec: mesh level must be >= 0");
}

Stat compute_stat(std::span<const double> values) {
    Stat s;
    const int n = static_cast<int>(values.size());
    if (n == 0) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / n;
    if (n < 2) return s;
    double ss = 0.0;
    for (double v : values) {
        const double d = v - s.mean;
        ss += d * d;
    }
    s.se = std::sqrt(ss / (n - 1)) / std::sqrt(static_cast<double>(n));
    return s;
}

namespace {

// Runs body(ctx, path_index) over all paths with per-thread contexts.
// Failures abort the whole ensemble; the lowest failing path index wins.
template <typename MakeCtx, typename Body>
void parallel_paths(int n_paths, int threads, MakeCtx make_ctx, Body body) {
    threads = std::max(1, std::min(threads, n_paths));
    if (threads == 1) {
        auto ctx = make_ctx();
        for (int p = 0; p < n_paths; ++p) {
            try {
                body(ctx, p);
            } catch (const NumericalError& e) {
                throw NumericalError("path " + std::to_string(p) + ": " + e.what(),
                                     e.residual());
            } catch (const std::exception& e) {
                throw NumericalError("path " + std::to_string(p) + ": " + e.what(),
                                     std::numeric_limits<double>::quiet_NaN());
            }
        }
        return;
    }
    std::atomic<int> next{0};
    std::mutex fail_mutex;
    int fail_path = -1;
    std::string fail_message;
    double fail_residual = 0.0;
    auto worker = [&]() {
        auto ctx = make_ctx();
        for (;;) {
            const int p = next.fetch_add(1);
            if (p >= n_paths) return;
            try {
                body(ctx, p);
            } catch (const std::exception& e) {
                const double res =
                    dynamic_cast<const NumericalError*>(&e)
                        ? dynamic_cast<const NumericalError&>(e).residual()
                        : std::numeric_limits<double>::quiet_NaN();
                std::lock_guard<std::mutex> lock(fail_mutex);
                if (fail_path < 0 || p < fail_path) {
                    fail_path = p;
                    fail_message = e.what();
                    fail_residual = res;
                }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (fail_path >= 0)
        throw NumericalError("path " + std::to_string(fail_path) + ": " + fail_message,
                             fail_residual);
}

double m_norm_sq(const SparseSpdMatrix& M, const Vector& x) { return x.dot(M * x); }

struct PathContext {
    Stepper stepper;
    ProblemData data;
};

PathContext make_context(const EnsembleSpec& spec, std::shared_ptr<const FeSpace> space) {
    return PathContext{Stepper(space, spec.params),
                       make_problem_data(space, spec.x0_field, spec.g_field, spec.quad_order)};
}

}  // namespace

EnsembleReport run_ensemble(const EnsembleSpec& spec) {
    spec.validate();
    auto space = std::make_shared<FeSpace>(build_mesh(spec.mesh));
    const SchemeParams& pr = spec.params;
    const double tau = pr.tau();

    const std::vector<std::string> names = {
        "max_sq_norm",      "final_sq_norm", "increment_sq_sum", "energy_sum",
        "weighted_sq_sum",  "final_energy",  "brownian_endpoint"};
    const int nf = static_cast<int>(names.size());
    std::vector<std::vector<double>> values(nf, std::vector<double>(spec.n_paths, 0.0));

    parallel_paths(
        spec.n_paths, spec.threads, [&] { return make_context(spec, space); },
        [&](PathContext& ctx, int p) {
            const WienerPath path = sample_path(spec.seed, p, pr.T, pr.N);
            double max_sq = 0.0, incr_sq = 0.0, je_sum = 0.0, sq_sum = 0.0;
            double final_sq = 0.0, final_energy = 0.0;
            run_streaming(ctx.stepper, ctx.data, path.fine_increments,
                          [&](int i, const Vector& prev, const Vector& x,
                              const StepDiagnostics&) {
                              const double sq = m_norm_sq(ctx.stepper.mass(), x);
                              max_sq = std::max(max_sq, sq);
                              sq_sum += sq;
                              incr_sq += m_norm_sq(ctx.stepper.mass(), x - prev);
                              const FeFunction xf{ctx.stepper.space_ptr(), x};
                              je_sum += regularized_tv(xf, pr.eps);
                              if (i == pr.N) {
                                  final_sq = sq;
                                  final_energy =
                                      energy(xf, ctx.data.g, pr.eps, pr.lambda).total;
                              }
                          });
            values[0][p] = max_sq;
            values[1][p] = final_sq;
            values[2][p] = incr_sq;
            values[3][p] = tau * je_sum;
            values[4][p] = 0.5 * tau * pr.lambda * sq_sum;
            values[5][p] = final_energy;
            values[6][p] = pairwise_sum(path.fine_increments);
        });

    EnsembleReport report;
    report.n_paths = spec.n_paths;
    report.tau = tau;
    report.functional_names = names;
    report.per_path_values = std::move(values);
    report.functional_stats.reserve(nf);
    for (int f = 0; f < nf; ++f)
        report.functional_stats.push_back(compute_stat(report.per_path_values[f]));
    return report;
}

EnsembleReport estimate_energy_bound(const EnsembleSpec& spec) {
    spec.validate();
    if (spec.params.delta != 0.0)
        throw std::invalid_argument(
            "estimate_energy_bound: requires delta = 0 (use the delta study for delta > 0)");
    auto space = std::make_shared<FeSpace>(build_mesh(spec.mesh));
    const SchemeParams& pr = spec.params;
    const double tau = pr.tau();
    const int N = pr.N;
    const int n_paths = spec.n_paths;

    // Per-path records: ||X^i||_M^2 for every i, J_eps(X^k) per step, and
    // the two scalar sums; the composite is assembled after the argmax of
    // the mean squared-norm curve is known.
    std::vector<std::vector<double>> sq(n_paths, std::vector<double>(N + 1, 0.0));
    std::vector<std::vector<double>> je(n_paths, std::vector<double>(N, 0.0));
    std::vector<double> incr_sq(n_paths, 0.0);

    parallel_paths(
        n_paths, spec.threads, [&] { return make_context(spec, space); },
        [&](PathContext& ctx, int p) {
            const WienerPath path = sample_path(spec.seed, p, pr.T, pr.N);
            sq[p][0] = m_norm_sq(ctx.stepper.mass(), ctx.data.x0.coeffs);
            run_streaming(ctx.stepper, ctx.data, path.fine_increments,
                          [&](int i, const Vector& prev, const Vector& x,
                              const StepDiagnostics&) {
                              sq[p][i] = m_norm_sq(ctx.stepper.mass(), x);
                              incr_sq[p] += m_norm_sq(ctx.stepper.mass(), x - prev);
                              je[p][i - 1] = regularized_tv(
                                  FeFunction{ctx.stepper.space_ptr(), x}, pr.eps);
                          });
        });

    EnsembleReport report;
    report.n_paths = n_paths;
    report.tau = tau;
    report.t.resize(N + 1);
    report.sq_norm_by_index.resize(N + 1);
    report.cum_energy_by_index.assign(N + 1, 0.0);
    std::vector<double> column(n_paths);
    for (int i = 0; i <= N; ++i) {
        report.t[i] = i * tau;
        for (int p = 0; p < n_paths; ++p) column[p] = sq[p][i];
        report.sq_norm_by_index[i] = compute_stat(column);
        if (i >= 1) {
            double mean_je = 0.0;
            for (int p = 0; p < n_paths; ++p) mean_je += je[p][i - 1];
            mean_je /= n_paths;
            report.cum_energy_by_index[i] = report.cum_energy_by_index[i - 1] + tau * mean_je;
        }
    }

    int argmax = 1;
    for (int i = 2; i <= N; ++i)
        if (report.sq_norm_by_index[i].mean > report.sq_norm_by_index[argmax].mean) argmax = i;
    report.argmax_index = argmax;

    std::vector<double> composite(n_paths), piece(n_paths);
    for (int p = 0; p < n_paths; ++p) {
        double je_sum = 0.0, sq_sum = 0.0;
        for (int k = 1; k <= N; ++k) {
            je_sum += je[p][k - 1];
            sq_sum += sq[p][k];
        }
        composite[p] = sq[p][argmax] + 0.25 * incr_sq[p] + tau * je_sum +
                       0.5 * tau * pr.lambda * sq_sum;
    }
    report.lhs_total = compute_stat(composite);
    for (int p = 0; p < n_paths; ++p) piece[p] = sq[p][argmax];
    report.term_max_sq = compute_stat(piece).mean;
    for (int p = 0; p < n_paths; ++p) piece[p] = 0.25 * incr_sq[p];
    report.term_incr = compute_stat(piece).mean;
    for (int p = 0; p < n_paths; ++p) {
        double s = 0.0;
        for (int k = 0; k < N; ++k) s += je[p][k];
        piece[p] = tau * s;
    }
    report.term_energy = compute_stat(piece).mean;
    for (int p = 0; p < n_paths; ++p) {
        double s = 0.0;
        for (int k = 1; k <= N; ++k) s += sq[p][k];
        piece[p] = 0.5 * tau * pr.lambda * s;
    }
    report.term_weighted_sq = compute_stat(piece).mean;

    // Explicit Gronwall constant from the unrolled energy inequality.
    const ProblemData data = make_problem_data(space, spec.x0_field, spec.g_field, spec.quad_order);
    const SparseSpdMatrix M = assemble_mass(*space);
    const double domain_measure = space->mesh().total_measure();
    const double rhs0 = pr.T * pr.eps * domain_measure + 0.5 * m_norm_sq(M, data.x0.coeffs) +
                        pr.T * pr.lambda * m_norm_sq(M, data.g.coeffs);
    report.gronwall_bound = 2.0 * rhs0 * std::exp(2.0 * pr.T);
    report.bound_pass = report.lhs_total.mean <= report.gronwall_bound + 3.0 * report.lhs_total.se;
    return report;
}

ConvergenceTable cauchy_study(const EnsembleSpec& base_spec, int n_levels) {
    base_spec.validate();
    if (n_levels < 2) throw std::invalid_argument("cauchy_study: n_levels must be >= 2");

    struct Level {
        std::shared_ptr<const FeSpace> space;
        SchemeParams params;
        SparseSpdMatrix mass;
    };
    std::vector<Level> levels(n_levels);
    auto mesh = build_mesh(base_spec.mesh);
    std::uint64_t max_pair_bytes = 0;
    for (int L = 0; L < n_levels; ++L) {
        if (L > 0) mesh = refine(mesh);
        Level& lv = levels[L];
        lv.space = std::make_shared<FeSpace>(mesh);
        lv.params = base_spec.params;
        lv.params.N = base_spec.params.N << L;
        lv.mass = assemble_mass(*lv.space);
        const std::uint64_t bytes =
            8ull * (lv.params.N + 1) * lv.space->n_dofs();
        if (L > 0) {
            const std::uint64_t prev =
                8ull * (levels[L - 1].params.N + 1) * levels[L - 1].space->n_dofs();
            max_pair_bytes = std::max(max_pair_bytes, bytes + prev);
        }
    }
    const std::uint64_t need = max_pair_bytes * std::max(1, std::min(base_spec.threads,
                                                                     base_spec.n_paths));
    if (need > base_spec.state_budget_bytes)
        throw std::invalid_argument("cauchy_study: trajectory storage (" + std::to_string(need) +
                                    " bytes) exceeds the state budget");

    const int n_fine = base_spec.params.N << (n_levels - 1);
    const int n_pairs = n_levels - 1;
    std::vector<std::vector<double>> d2(n_pairs, std::vector<double>(base_spec.n_paths, 0.0));

    struct Ctx {
        std::vector<Stepper> steppers;
        std::vector<ProblemData> data;
    };
    parallel_paths(
        base_spec.n_paths, base_spec.threads,
        [&] {
            Ctx ctx;
            for (const Level& lv : levels) {
                ctx.steppers.emplace_back(lv.space, lv.params);
                ctx.data.push_back(make_problem_data(lv.space, base_spec.x0_field,
                                                     base_spec.g_field, base_spec.quad_order));
            }
            return ctx;
        },
        [&](Ctx& ctx, int p) {
            const WienerPath path = sample_path(base_spec.seed, p, base_spec.params.T, n_fine);
            const std::uint64_t fingerprint = path.checksum();
            Trajectory prev;
            for (int L = 0; L < n_levels; ++L) {
                if (path.checksum() != fingerprint)
                    throw NumericalError("cauchy_study: coupled path mutated between levels", 0.0);
                const std::vector<double> incs = coarsen(path, levels[L].params.N);
                Trajectory traj = run_trajectory(levels[L].space, levels[L].params,
                                                 ctx.data[L], incs);
                if (L > 0) {
                    const double d = spacetime_l2_diff(prev, traj, levels[L].mass);
                    d2[L - 1][p] = d * d;
                }
                prev = std::move(traj);
            }
        });

    ConvergenceTable table;
    table.rows.resize(n_pairs);
    for (int j = 0; j < n_pairs; ++j) {
        ConvergenceRow& row = table.rows[j];
        row.level = j;
        row.h_max = levels[j].space->mesh().h_max;
        row.tau = levels[j].params.tau();
        row.eps = base_spec.params.eps;
        row.delta = base_spec.params.delta;
        const Stat s = compute_stat(d2[j]);
        row.diff = std::sqrt(s.mean);
        row.diff_se = row.diff > 0.0 ? s.se / (2.0 * row.diff) : 0.0;
        row.monotone = j == 0 || row.diff < table.rows[j - 1].diff;
    }
    return table;
}

ConvergenceTable delta_study(const EnsembleSpec& spec, const std::vector<double>& deltas) {
    spec.validate();
    if (deltas.empty()) throw std::invalid_argument("delta_study: empty delta list");
    for (std::size_t j = 0; j < deltas.size(); ++j) {
        if (!(deltas[j] > 0.0))
            throw std::invalid_argument("delta_study: all deltas must be positive "
                                        "(the delta = 0 reference run is implicit)");
        if (j > 0 && !(deltas[j] < deltas[j - 1]))
            throw std::invalid_argument("delta_study: deltas must be strictly decreasing");
    }

    auto space = std::make_shared<FeSpace>(build_mesh(spec.mesh));
    const int N = spec.params.N;
    const int nd = static_cast<int>(deltas.size());

    SchemeParams ref_params = spec.params;
    ref_params.delta = 0.0;
    std::vector<SchemeParams> delta_params(nd, spec.params);
    for (int j = 0; j < nd; ++j) delta_params[j].delta = deltas[j];

    // gaps[j][p][i] = ||X^i_{delta_j} - X^i_0||_M^2 for path p
    std::vector<std::vector<std::vector<double>>> gaps(
        nd, std::vector<std::vector<double>>(spec.n_paths, std::vector<double>(N + 1, 0.0)));

    struct Ctx {
        Stepper ref;
        std::vector<Stepper> per_delta;
        ProblemData data;
        SparseSpdMatrix mass;
    };
    parallel_paths(
        spec.n_paths, spec.threads,
        [&] {
            Ctx ctx{Stepper(space, ref_params),
                    {},
                    make_problem_data(space, spec.x0_field, spec.g_field, spec.quad_order),
                    assemble_mass(*space)};
            for (int j = 0; j < nd; ++j) ctx.per_delta.emplace_back(space, delta_params[j]);
            return ctx;
        },
        [&](Ctx& ctx, int p) {
            const WienerPath path = sample_path(spec.seed, p, spec.params.T, N);
            std::vector<Vector> ref_states(N + 1);
            ref_states[0] = ctx.data.x0.coeffs;
            run_streaming(ctx.ref, ctx.data, path.fine_increments,
                          [&](int i, const Vector&, const Vector& x, const StepDiagnostics&) {
                              ref_states[i] = x;
                          });
            for (int j = 0; j < nd; ++j) {
                run_streaming(ctx.per_delta[j], ctx.data, path.fine_increments,
                              [&](int i, const Vector&, const Vector& x,
                                  const StepDiagnostics&) {
                                  gaps[j][p][i] = m_norm_sq(ctx.mass, x - ref_states[i]);
                              });
            }
        });

    // Data H1_0 seminorms reported beside the gaps; no constant is asserted.
    const ProblemData data = make_problem_data(space, spec.x0_field, spec.g_field, spec.quad_order);
    const SparseSpdMatrix K = assemble_stiffness(*space);
    const double x0_h1 = data.x0.coeffs.dot(K * data.x0.coeffs);
    const double g_h1 = data.g.coeffs.dot(K * data.g.coeffs);

    ConvergenceTable table;
    table.extra_columns = {"x0_h1_sq", "g_h1_sq"};
    table.rows.resize(nd);
    std::vector<double> column(spec.n_paths);
    for (int j = 0; j < nd; ++j) {
        int argmax = 1;
        Stat best;
        for (int i = 1; i <= N; ++i) {
            for (int p = 0; p < spec.n_paths; ++p) column[p] = gaps[j][p][i];
            const Stat s = compute_stat(column);
            if (i == 1 || s.mean > best.mean) {
                best = s;
                argmax = i;
            }
        }
        (void)argmax;
        ConvergenceRow& row = table.rows[j];
        row.level = spec.mesh.level;
        row.h_max = space->mesh().h_max;
        row.tau = spec.params.tau();
        row.eps = spec.params.eps;
        row.delta = deltas[j];
        row.diff = best.mean;
        row.diff_se = best.se;
        row.monotone = j == 0 || row.diff < table.rows[j - 1].diff;
        row.extras = {x0_h1, g_h1};
    }
    return table;
}

ConvergenceTable data_stability_study(
    const EnsembleSpec& spec,
    const std::vector<std::pair<ProblemData, ProblemData>>& data_pairs) {
    spec.validate();
    if (data_pairs.empty()) throw std::invalid_argument("data_stability_study: no data pairs");
    for (const auto& [a, b] : data_pairs)
        if (a.x0.space.get() != b.x0.space.get())
            throw std::invalid_argument("data_stability_study: pair members must share the space");

    const auto space = data_pairs.front().first.x0.space;
    const int N = spec.params.N;
    const int np = static_cast<int>(data_pairs.size());
    std::vector<std::vector<std::vector<double>>> gaps(
        np, std::vector<std::vector<double>>(spec.n_paths, std::vector<double>(N + 1, 0.0)));

    struct Ctx {
        Stepper stepper;
        SparseSpdMatrix mass;
    };
    parallel_paths(
        spec.n_paths, spec.threads,
        [&] { return Ctx{Stepper(space, spec.params), assemble_mass(*space)}; },
        [&](Ctx& ctx, int p) {
            const WienerPath path = sample_path(spec.seed, p, spec.params.T, N);
            for (int k = 0; k < np; ++k) {
                std::vector<Vector> first_states(N + 1);
                first_states[0] = data_pairs[k].first.x0.coeffs;
                run_streaming(ctx.stepper, data_pairs[k].first, path.fine_increments,
                              [&](int i, const Vector&, const Vector& x,
                                  const StepDiagnostics&) { first_states[i] = x; });
                gaps[k][p][0] = m_norm_sq(
                    ctx.mass, data_pairs[k].second.x0.coeffs - first_states[0]);
                run_streaming(ctx.stepper, data_pairs[k].second, path.fine_increments,
                              [&](int i, const Vector&, const Vector& x,
                                  const StepDiagnostics&) {
                                  gaps[k][p][i] = m_norm_sq(ctx.mass, x - first_states[i]);
                              });
            }
        });

    const SparseSpdMatrix M = assemble_mass(*space);
    ConvergenceTable table;
    table.extra_columns = {"x0_dist_sq", "g_dist_sq", "ratio"};
    table.rows.resize(np);
    std::vector<double> column(spec.n_paths);
    for (int k = 0; k < np; ++k) {
        Stat best;
        for (int i = 1; i <= N; ++i) {
            for (int p = 0; p < spec.n_paths; ++p) column[p] = gaps[k][p][i];
            const Stat s = compute_stat(column);
            if (i == 1 || s.mean > best.mean) best = s;
        }
        const auto& [a, b] = data_pairs[k];
        const double x0_dist = m_norm_sq(M, a.x0.coeffs - b.x0.coeffs);
        const double g_dist =
            spec.params.lambda * m_norm_sq(M, a.g.coeffs - b.g.coeffs);
        ConvergenceRow& row = table.rows[k];
        row.level = k;
        row.h_max = space->mesh().h_max;
        row.tau = spec.params.tau();
        row.eps = spec.params.eps;
        row.delta = spec.params.delta;
        row.diff = best.mean;
        row.diff_se = best.se;
        row.monotone = k == 0 || row.diff < table.rows[k - 1].diff;
        const double drive = x0_dist + g_dist;
        row.extras = {x0_dist, g_dist,
                      drive > 0.0 ? row.diff / drive : std::numeric_limits<double>::quiet_NaN()};
    }
    return table;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_energy_csv(std::ostream& out, const EnsembleReport& report) {
    out << "i,t_i,mean_sq_norm,se,cum_energy_sum,lhs_total,gronwall_bound,pass\n";
    for (std::size_t i = 0; i < report.t.size(); ++i) {
        out << i << ',' << fmt(report.t[i]) << ',' << fmt(report.sq_norm_by_index[i].mean)
            << ',' << fmt(report.sq_norm_by_index[i].se) << ','
            << fmt(report.cum_energy_by_index[i]) << ',' << fmt(report.lhs_total.mean) << ','
            << fmt(report.gronwall_bound) << ',' << (report.bound_pass ? 1 : 0) << '\n';
    }
}

void write_convergence_csv(std::ostream& out, const ConvergenceTable& table) {
    out << "level,h,tau,eps,delta,diff,se,monotone";
    for (const std::string& name : table.extra_columns) out << ',' << name;
    out << '\n';
    for (const ConvergenceRow& row : table.rows) {
        out << row.level << ',' << fmt(row.h_max) << ',' << fmt(row.tau) << ','
            << fmt(row.eps) << ',' << fmt(row.delta) << ',' << fmt(row.diff) << ','
            << fmt(row.diff_se) << ',' << (row.monotone ? 1 : 0);
        for (double v : row.extras) out << ',' << fmt(v);
        out << '\n';
    }
}

}  // namespace stvf
