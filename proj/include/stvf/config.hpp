#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "stvf/experiment.hpp"

namespace stvf {

/// Configuration problem (bad key, bad value, missing file); maps to CLI
/// exit status 2. Messages carry the key name and line number.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Fully resolved run plan parsed from the flat `key = value` config format.
struct RunConfig {
    std::string command;  // simulate|energy-bound|cauchy|delta-study|data-stability

    std::string domain = "interval";  // or "rectangle"; mesh_file overrides
    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
    std::string mesh_file;
    int n_cells = 16, n_x = 16, n_y = 16, level = 0;

    SchemeParams params;
    FieldSpec x0_field;
    FieldSpec g_field;

    int n_paths = 2;
    std::uint64_t seed = 0;
    int threads = 1;
    int quad_order = 4;
    double state_budget_mb = 2048.0;

    int n_levels = 2;             // cauchy
    std::vector<double> deltas;   // delta-study
    std::vector<double> widths;   // data-stability smoothing widths
    int snapshot_every = 0;       // simulate
    int path_index = 0;           // simulate

    MeshSpec mesh_spec() const;
    EnsembleSpec ensemble_spec() const;
};

/// Parse the flat config grammar: one `key = value` per line, `#` comments,
/// blank lines allowed. Unknown keys, bad values and missing required keys
/// raise ConfigError with the key name and line number. Later assignments
/// override earlier ones.
RunConfig parse_config(const std::string& text);

/// `overrides` are `key=value` strings applied after the file content.
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides);

/// Canonical serialization in the config grammar; parsing it reproduces the
/// same resolved RunConfig. Used for the run manifest.
std::string serialize_config(const RunConfig& config);

/// One line per key: `key<TAB>default<TAB>description`, for --help.
std::string config_reference();

}  // namespace stvf
