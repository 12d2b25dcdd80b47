#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "stvf/config.hpp"
#include "stvf/energy.hpp"
#include "stvf/version.hpp"

namespace fs = std::filesystem;
using namespace stvf;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void run_simulate(const RunConfig& cfg, const fs::path& out_dir, bool quiet) {
    auto space = std::make_shared<FeSpace>(build_mesh(cfg.mesh_spec()));
    const ProblemData data =
        make_problem_data(space, cfg.x0_field, cfg.g_field, cfg.quad_order);
    const WienerPath path =
        sample_path(cfg.seed, cfg.path_index, cfg.params.T, cfg.params.N);
    Stepper stepper(space, cfg.params);

    std::ostringstream csv;
    csv << "i,t_i,dW_i,newton_iters,residual_inf,sq_norm,energy_total\n";
    char buf[256];
    const SparseSpdMatrix& M = stepper.mass();
    auto emit = [&](int i, double dW, int iters, double res, const Vector& x) {
        const double sq = x.dot(M * x);
        const double en = energy(FeFunction{space, x}, data.g, cfg.params.eps,
                                 cfg.params.lambda).total;
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%d,%.17g,%.17g,%.17g\n", i,
                      i * cfg.params.tau(), dW, iters, res, sq, en);
        csv << buf;
    };
    auto snapshot = [&](int i, double dW, int iters, const Vector& x) {
        if (cfg.snapshot_every <= 0) return;
        if (i % cfg.snapshot_every != 0 && i != cfg.params.N) return;
        std::snprintf(buf, sizeof(buf), "snapshot_%06d.txt", i);
        std::ofstream snap(out_dir / buf, std::ios::binary);
        char head[128];
        std::snprintf(head, sizeof(head), "%d %.17g %.17g %d\n", i, i * cfg.params.tau(), dW,
                      iters);
        snap << head;
        write_fefunction(snap, FeFunction{space, x});
    };

    emit(0, 0.0, 0, 0.0, data.x0.coeffs);
    snapshot(0, 0.0, 0, data.x0.coeffs);
    run_streaming(stepper, data, path.fine_increments,
                  [&](int i, const Vector&, const Vector& x, const StepDiagnostics& d) {
                      emit(i, d.dW, d.newton_iters, d.residual_inf, x);
                      snapshot(i, d.dW, d.newton_iters, x);
                  });
    write_text(out_dir / "trajectory.csv", csv.str());
    if (!quiet) std::cout << "wrote " << (out_dir / "trajectory.csv").string() << "\n";
}

std::vector<std::pair<ProblemData, ProblemData>> build_data_pairs(const RunConfig& cfg) {
    auto space = std::make_shared<FeSpace>(build_mesh(cfg.mesh_spec()));
    const ProblemData exact =
        make_problem_data(space, cfg.x0_field, cfg.g_field, cfg.quad_order);
    std::vector<std::pair<ProblemData, ProblemData>> pairs;
    for (double w : cfg.widths) {
        FieldSpec approx = cfg.x0_field;
        approx.name = "smoothed_disc";
        approx.params["width"] = w;
        pairs.emplace_back(exact,
                           make_problem_data(space, approx, cfg.g_field, cfg.quad_order));
    }
    return pairs;
}

int run(const RunConfig& cfg, const fs::path& out_dir, bool quiet) {
    if (!quiet) {
        auto mesh = build_mesh(cfg.mesh_spec());
        const FeSpace probe(mesh);
        std::cout << "stvf " << kVersion << ": " << cfg.command << ", "
                  << (mesh->dim == 1 ? "1D" : "2D") << " mesh level " << mesh->level << " ("
                  << probe.n_dofs() << " dofs, h_max = " << mesh->h_max << "), tau = "
                  << cfg.params.tau() << ", seed = " << cfg.seed << ", n_paths = "
                  << cfg.n_paths << "\n";
    }

    if (cfg.command == "simulate") {
        run_simulate(cfg, out_dir, quiet);
        return 0;
    }
    if (cfg.command == "energy-bound") {
        const EnsembleReport report = estimate_energy_bound(cfg.ensemble_spec());
        std::ostringstream csv;
        write_energy_csv(csv, report);
        write_text(out_dir / "energy_bound.csv", csv.str());
        if (!quiet)
            std::cout << "estimate = " << report.lhs_total.mean << " (se "
                      << report.lhs_total.se << "), bound = " << report.gronwall_bound
                      << ", pass = " << (report.bound_pass ? "yes" : "no") << "\n";
        return 0;
    }

    ConvergenceTable table;
    std::string csv_name;
    if (cfg.command == "cauchy") {
        table = cauchy_study(cfg.ensemble_spec(), cfg.n_levels);
        csv_name = "cauchy.csv";
    } else if (cfg.command == "delta-study") {
        table = delta_study(cfg.ensemble_spec(), cfg.deltas);
        csv_name = "delta_study.csv";
    } else {
        table = data_stability_study(cfg.ensemble_spec(), build_data_pairs(cfg));
        csv_name = "data_stability.csv";
    }
    std::ostringstream csv;
    write_convergence_csv(csv, table);
    write_text(out_dir / csv_name, csv.str());
    if (!quiet) {
        std::cout << "wrote " << (out_dir / csv_name).string() << "\n";
        for (const ConvergenceRow& row : table.rows)
            std::cout << "  level " << row.level << " delta " << row.delta << ": diff = "
                      << row.diff << (row.monotone ? "" : "  [not monotone]") << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string("stvf ") + kVersion +
                 " - regularized stochastic total variation flow studies"};
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir_arg = ".";
    bool quiet = false;
    app.add_option("--config", config_path, "config file (flat key = value lines)")
        ->required();
    app.add_option("--set", overrides, "override config entries, e.g. --set N=64");
    app.add_option("--out", out_dir_arg, "output directory for CSV reports and the manifest");
    app.add_flag("--quiet", quiet, "suppress the run banner");
    app.footer("Config keys (key, default, meaning):\n" + config_reference());

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    const auto t_start = std::chrono::steady_clock::now();
    RunConfig cfg;
    fs::path out_dir;
    try {
        cfg = parse_config(read_file(config_path), overrides);
        cfg.params.validate();
        build_mesh(cfg.mesh_spec());  // geometry problems are config problems
        out_dir = out_dir_arg;
        fs::create_directories(out_dir);
        std::ofstream probe(out_dir / ".write_probe");
        if (!probe) throw ConfigError("output directory is not writable: " + out_dir.string());
        probe.close();
        fs::remove(out_dir / ".write_probe");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    int status = 0;
    try {
        status = run(cfg, out_dir, quiet);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    std::ostringstream manifest;
    manifest << "# stvf " << kVersion << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", wall);
    manifest << "# wall_clock_seconds = " << buf << "\n";
    manifest << serialize_config(cfg);
    try {
        write_text(out_dir / "manifest.txt", manifest.str());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return status;
}
