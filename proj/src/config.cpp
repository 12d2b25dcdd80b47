#include "stvf/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

namespace stvf {

namespace {

struct Assignment {
    std::string value;
    int line;  // 0 means command-line override
};

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

[[noreturn]] void fail(const std::string& key, int line, const std::string& what) {
    std::ostringstream os;
    os << "config error";
    if (line > 0) os << " (line " << line << ")";
    else if (line == 0) os << " (command line)";
    if (!key.empty()) os << " at key '" << key << "'";
    os << ": " << what;
    throw ConfigError(os.str());
}

class KeyValues {
public:
    void assign(const std::string& key, const std::string& value, int line) {
        values_[key] = Assignment{value, line};
    }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        used_.insert(key);
        return it->second.value;
    }
    std::string require_string(const std::string& key) {
        auto it = values_.find(key);
        if (it == values_.end()) fail(key, -1, "required key is missing");
        used_.insert(key);
        return it->second.value;
    }
    double get_real(const std::string& key, double fallback) {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        used_.insert(key);
        return parse_real(key, it->second);
    }
    long long get_int(const std::string& key, long long fallback) {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        used_.insert(key);
        const Assignment& a = it->second;
        errno = 0;
        char* end = nullptr;
        const long long v = std::strtoll(a.value.c_str(), &end, 10);
        if (end == a.value.c_str() || *end != '\0' || errno != 0)
            fail(key, a.line, "expected an integer, got '" + a.value + "'");
        return v;
    }
    std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        used_.insert(key);
        const Assignment& a = it->second;
        errno = 0;
        char* end = nullptr;
        const unsigned long long v = std::strtoull(a.value.c_str(), &end, 10);
        if (end == a.value.c_str() || *end != '\0' || errno != 0)
            fail(key, a.line, "expected an unsigned integer, got '" + a.value + "'");
        return v;
    }
    std::vector<double> get_real_list(const std::string& key) {
        auto it = values_.find(key);
        if (it == values_.end()) return {};
        used_.insert(key);
        const Assignment& a = it->second;
        std::vector<double> out;
        std::string token;
        std::istringstream is(a.value);
        while (std::getline(is, token, ',')) {
            token = trim(token);
            if (token.empty()) fail(key, a.line, "empty list entry");
            out.push_back(parse_real(key, Assignment{token, a.line}));
        }
        if (out.empty()) fail(key, a.line, "expected a comma-separated list of reals");
        return out;
    }
    int line_of(const std::string& key) const {
        auto it = values_.find(key);
        return it == values_.end() ? -1 : it->second.line;
    }
    void check_all_used() const {
        for (const auto& [key, a] : values_)
            if (!used_.count(key)) fail(key, a.line, "unknown key");
    }

private:
    static double parse_real(const std::string& key, const Assignment& a) {
        errno = 0;
        char* end = nullptr;
        const double v = std::strtod(a.value.c_str(), &end);
        if (end == a.value.c_str() || *end != '\0' || errno == ERANGE)
            fail(key, a.line, "expected a real number, got '" + a.value + "'");
        return v;
    }

    std::map<std::string, Assignment> values_;
    std::set<std::string> used_;
};

void parse_line(KeyValues& kv, const std::string& raw, int line_no) {
    std::string line = raw;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) return;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
        fail("", line_no, "expected 'key = value', got '" + trim(raw) + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail("", line_no, "empty key");
    if (value.empty()) fail(key, line_no, "empty value");
    kv.assign(key, value, line_no);
}

void read_field(KeyValues& kv, const std::string& prefix, FieldSpec& spec) {
    spec.name = kv.get_string(prefix + "_field", spec.name);
    for (const char* pname :
         {"amplitude", "center_x", "center_y", "radius", "width", "modes_x", "modes_y"}) {
        const std::string key = prefix + "_" + pname;
        if (kv.has(key)) spec.params[pname] = kv.get_real(key, 0.0);
    }
}

void check_range(bool ok, const std::string& key, int line, const std::string& what) {
    if (!ok) fail(key, line, what);
}

}  // namespace

MeshSpec RunConfig::mesh_spec() const {
    MeshSpec ms;
    ms.mesh_file = mesh_file;
    if (mesh_file.empty())
        ms.domain = (domain == "interval") ? Domain::interval(xmin, xmax)
                                           : Domain::rectangle(xmin, ymin, xmax, ymax);
    ms.n_cells = n_cells;
    ms.n_x = n_x;
    ms.n_y = n_y;
    ms.level = level;
    return ms;
}

EnsembleSpec RunConfig::ensemble_spec() const {
    EnsembleSpec spec;
    spec.mesh = mesh_spec();
    spec.x0_field = x0_field;
    spec.g_field = g_field;
    spec.params = params;
    spec.n_paths = n_paths;
    spec.seed = seed;
    spec.threads = threads;
    spec.quad_order = quad_order;
    spec.state_budget_bytes = static_cast<std::uint64_t>(state_budget_mb * 1024.0 * 1024.0);
    return spec;
}

RunConfig parse_config(const std::string& text) {
    return parse_config(text, {});
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
    KeyValues kv;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) parse_line(kv, line, ++line_no);
    for (const std::string& ov : overrides) parse_line(kv, ov, 0);

    RunConfig cfg;
    cfg.command = kv.require_string("command");
    static const std::set<std::string> commands = {"simulate", "energy-bound", "cauchy",
                                                   "delta-study", "data-stability"};
    if (!commands.count(cfg.command))
        fail("command", kv.line_of("command"),
             "unknown command '" + cfg.command +
                 "' (expected simulate|energy-bound|cauchy|delta-study|data-stability)");

    cfg.mesh_file = kv.get_string("mesh_file", "");
    if (cfg.mesh_file.empty()) {
        cfg.domain = kv.require_string("domain");
        if (cfg.domain != "interval" && cfg.domain != "rectangle")
            fail("domain", kv.line_of("domain"),
                 "expected 'interval' or 'rectangle' (or supply mesh_file)");
    } else {
        cfg.domain = kv.get_string("domain", "file");
    }
    cfg.xmin = kv.get_real("xmin", cfg.xmin);
    cfg.xmax = kv.get_real("xmax", cfg.xmax);
    cfg.ymin = kv.get_real("ymin", cfg.ymin);
    cfg.ymax = kv.get_real("ymax", cfg.ymax);
    cfg.n_cells = static_cast<int>(kv.get_int("n_cells", cfg.n_cells));
    cfg.n_x = static_cast<int>(kv.get_int("n_x", cfg.n_x));
    cfg.n_y = static_cast<int>(kv.get_int("n_y", cfg.n_y));
    cfg.level = static_cast<int>(kv.get_int("level", cfg.level));

    cfg.params.eps = kv.get_real("eps", cfg.params.eps);
    cfg.params.delta = kv.get_real("delta", cfg.params.delta);
    cfg.params.lambda = kv.get_real("lambda", cfg.params.lambda);
    cfg.params.T = kv.get_real("T", cfg.params.T);
    cfg.params.N = static_cast<int>(kv.get_int("N", cfg.params.N));
    cfg.params.newton_abs_tol = kv.get_real("newton_abs_tol", cfg.params.newton_abs_tol);
    cfg.params.newton_max_iter =
        static_cast<int>(kv.get_int("newton_max_iter", cfg.params.newton_max_iter));
    cfg.params.linear_rel_tol = kv.get_real("linear_rel_tol", cfg.params.linear_rel_tol);

    read_field(kv, "x0", cfg.x0_field);
    read_field(kv, "g", cfg.g_field);

    cfg.n_paths = static_cast<int>(kv.get_int("n_paths", cfg.n_paths));
    cfg.seed = kv.get_uint64("seed", cfg.seed);
    cfg.threads = static_cast<int>(kv.get_int("threads", cfg.threads));
    cfg.quad_order = static_cast<int>(kv.get_int("quad_order", cfg.quad_order));
    cfg.state_budget_mb = kv.get_real("state_budget_mb", cfg.state_budget_mb);
    cfg.n_levels = static_cast<int>(kv.get_int("n_levels", cfg.n_levels));
    cfg.deltas = kv.get_real_list("deltas");
    cfg.widths = kv.get_real_list("widths");
    cfg.snapshot_every = static_cast<int>(kv.get_int("snapshot_every", cfg.snapshot_every));
    cfg.path_index = static_cast<int>(kv.get_int("path_index", cfg.path_index));

    // Required scalars beyond command/domain.
    for (const char* req : {"N", "T", "eps", "n_paths", "seed"})
        if (!kv.has(req)) fail(req, -1, "required key is missing");

    kv.check_all_used();

    // Range validation with key/line diagnostics.
    check_range(cfg.params.eps >= 1e-12 && cfg.params.eps <= 1.0, "eps", kv.line_of("eps"),
                "eps must lie in [1e-12, 1]");
    check_range(cfg.params.delta >= 0.0, "delta", kv.line_of("delta"), "delta must be >= 0");
    check_range(cfg.params.lambda >= 0.0, "lambda", kv.line_of("lambda"), "lambda must be >= 0");
    check_range(cfg.params.T > 0.0, "T", kv.line_of("T"), "T must be positive");
    check_range(cfg.params.N >= 1, "N", kv.line_of("N"), "N must be >= 1");
    check_range(cfg.params.newton_abs_tol > 0.0, "newton_abs_tol", kv.line_of("newton_abs_tol"),
                "newton_abs_tol must be positive");
    check_range(cfg.params.newton_max_iter >= 1, "newton_max_iter",
                kv.line_of("newton_max_iter"), "newton_max_iter must be >= 1");
    check_range(cfg.params.linear_rel_tol > 0.0 && cfg.params.linear_rel_tol <= 1e-6,
                "linear_rel_tol", kv.line_of("linear_rel_tol"),
                "linear_rel_tol must lie in (0, 1e-6]");
    check_range(cfg.n_paths >= 1, "n_paths", kv.line_of("n_paths"), "n_paths must be >= 1");
    check_range(cfg.threads >= 1, "threads", kv.line_of("threads"), "threads must be >= 1");
    check_range(cfg.quad_order >= 1, "quad_order", kv.line_of("quad_order"),
                "quad_order must be >= 1");
    check_range(cfg.level >= 0, "level", kv.line_of("level"), "level must be >= 0");
    check_range(cfg.n_levels >= 2 || cfg.command != "cauchy", "n_levels",
                kv.line_of("n_levels"), "cauchy needs n_levels >= 2");
    check_range(cfg.snapshot_every >= 0, "snapshot_every", kv.line_of("snapshot_every"),
                "snapshot_every must be >= 0");
    check_range(cfg.path_index >= 0, "path_index", kv.line_of("path_index"),
                "path_index must be >= 0");
    check_range(cfg.state_budget_mb > 0.0, "state_budget_mb", kv.line_of("state_budget_mb"),
                "state_budget_mb must be positive");
    if (cfg.mesh_file.empty()) {
        if (cfg.domain == "interval") {
            check_range(cfg.xmin < cfg.xmax, "xmax", kv.line_of("xmax"),
                        "interval needs xmin < xmax");
            check_range(cfg.n_cells >= 2, "n_cells", kv.line_of("n_cells"),
                        "n_cells must be >= 2");
        } else {
            check_range(cfg.xmin < cfg.xmax && cfg.ymin < cfg.ymax, "xmax",
                        kv.line_of("xmax"), "rectangle needs xmin < xmax and ymin < ymax");
            check_range(cfg.n_x >= 2 && cfg.n_y >= 2, "n_x", kv.line_of("n_x"),
                        "n_x and n_y must be >= 2");
        }
    }
    if (cfg.command == "delta-study") {
        if (cfg.deltas.empty())
            fail("deltas", -1, "delta-study requires a strictly decreasing list of positive deltas");
        for (std::size_t j = 0; j < cfg.deltas.size(); ++j) {
            check_range(cfg.deltas[j] > 0.0, "deltas", kv.line_of("deltas"),
                        "all deltas must be positive (delta = 0 is the implicit reference)");
            if (j > 0)
                check_range(cfg.deltas[j] < cfg.deltas[j - 1], "deltas", kv.line_of("deltas"),
                            "deltas must be strictly decreasing");
        }
    }
    if (cfg.command == "data-stability") {
        if (cfg.widths.empty())
            fail("widths", -1, "data-stability requires a list of smoothing widths");
        for (double w : cfg.widths)
            check_range(w > 0.0, "widths", kv.line_of("widths"), "widths must be positive");
        if (cfg.x0_field.name != "disc_indicator")
            fail("x0_field", kv.line_of("x0_field"),
                 "data-stability smooths a disc_indicator target; set x0_field = disc_indicator");
    }
    return cfg;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void emit_field(std::ostream& out, const std::string& prefix, const FieldSpec& spec) {
    out << prefix << "_field = " << spec.name << '\n';
    for (const auto& [k, v] : spec.params) out << prefix << '_' << k << " = " << fmt(v) << '\n';
}

}  // namespace

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    out << "command = " << cfg.command << '\n';
    if (!cfg.mesh_file.empty()) out << "mesh_file = " << cfg.mesh_file << '\n';
    else out << "domain = " << cfg.domain << '\n';
    out << "xmin = " << fmt(cfg.xmin) << '\n';
    out << "xmax = " << fmt(cfg.xmax) << '\n';
    out << "ymin = " << fmt(cfg.ymin) << '\n';
    out << "ymax = " << fmt(cfg.ymax) << '\n';
    out << "n_cells = " << cfg.n_cells << '\n';
    out << "n_x = " << cfg.n_x << '\n';
    out << "n_y = " << cfg.n_y << '\n';
    out << "level = " << cfg.level << '\n';
    out << "eps = " << fmt(cfg.params.eps) << '\n';
    out << "delta = " << fmt(cfg.params.delta) << '\n';
    out << "lambda = " << fmt(cfg.params.lambda) << '\n';
    out << "T = " << fmt(cfg.params.T) << '\n';
    out << "N = " << cfg.params.N << '\n';
    out << "newton_abs_tol = " << fmt(cfg.params.newton_abs_tol) << '\n';
    out << "newton_max_iter = " << cfg.params.newton_max_iter << '\n';
    out << "linear_rel_tol = " << fmt(cfg.params.linear_rel_tol) << '\n';
    emit_field(out, "x0", cfg.x0_field);
    emit_field(out, "g", cfg.g_field);
    out << "n_paths = " << cfg.n_paths << '\n';
    out << "seed = " << cfg.seed << '\n';
    out << "threads = " << cfg.threads << '\n';
    out << "quad_order = " << cfg.quad_order << '\n';
    out << "state_budget_mb = " << fmt(cfg.state_budget_mb) << '\n';
    if (cfg.command == "cauchy") out << "n_levels = " << cfg.n_levels << '\n';
    if (!cfg.deltas.empty()) {
        out << "deltas = ";
        for (std::size_t j = 0; j < cfg.deltas.size(); ++j)
            out << (j ? "," : "") << fmt(cfg.deltas[j]);
        out << '\n';
    }
    if (!cfg.widths.empty()) {
        out << "widths = ";
        for (std::size_t j = 0; j < cfg.widths.size(); ++j)
            out << (j ? "," : "") << fmt(cfg.widths[j]);
        out << '\n';
    }
    if (cfg.command == "simulate") {
        out << "snapshot_every = " << cfg.snapshot_every << '\n';
        out << "path_index = " << cfg.path_index << '\n';
    }
    return out.str();
}

std::string config_reference() {
    return
        "command\t(required)\tsimulate|energy-bound|cauchy|delta-study|data-stability\n"
        "domain\t(required unless mesh_file)\tinterval|rectangle\n"
        "mesh_file\t(unset)\tcoarse mesh text file; overrides the generator\n"
        "xmin,xmax\t0,1\tinterval or rectangle x-extent\n"
        "ymin,ymax\t0,1\trectangle y-extent\n"
        "n_cells\t16\t1D cells (>= 2)\n"
        "n_x,n_y\t16,16\t2D quads per direction (>= 2), each split in two triangles\n"
        "level\t0\tuniform refinements applied to the base mesh\n"
        "eps\t(required)\tTV regularization, in [1e-12, 1]\n"
        "delta\t0\tviscosity coefficient (>= 0)\n"
        "lambda\t0\tfidelity weight (>= 0)\n"
        "T\t(required)\tfinal time (> 0)\n"
        "N\t(required)\ttime steps (>= 1); tau = T/N\n"
        "newton_abs_tol\t1e-10\tper-step Newton residual tolerance\n"
        "newton_max_iter\t50\tper-step Newton iteration cap\n"
        "linear_rel_tol\t1e-12\tlinear solver relative tolerance, in (0, 1e-6]\n"
        "x0_field,g_field\tzero\tzero|hat|bump|disc_indicator|smoothed_disc|sine_product\n"
        "x0_*,g_*\t(field-dependent)\tamplitude, center_x, center_y, radius, width, modes_x, modes_y\n"
        "n_paths\t(required)\tMonte Carlo paths (>= 2 for studies)\n"
        "seed\t(required)\t64-bit ensemble seed\n"
        "threads\t1\tworker threads; results are identical for any count\n"
        "quad_order\t4\tGauss points per direction for data projection\n"
        "state_budget_mb\t2048\tmemory guard for trajectory storage\n"
        "n_levels\t2\tcauchy refinement levels (>= 2)\n"
        "deltas\t(required for delta-study)\tstrictly decreasing positive list\n"
        "widths\t(required for data-stability)\tsmoothing widths for the disc approximants\n"
        "snapshot_every\t0\tsimulate: dump state every k steps (0 = off)\n"
        "path_index\t0\tsimulate: which path of the seed to run\n";
}

}  // namespace stvf
