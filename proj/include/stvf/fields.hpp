#pragma once

#include <map>
#include <string>

#include "stvf/fem.hpp"

namespace stvf {

/// Named analytic field with scalar parameters; the catalogue covers the
/// initial/fidelity data used by the studies. Parameters not set fall back
/// to frame-derived defaults (center of the mesh bounding box, etc.).
struct FieldSpec {
    std::string name = "zero";  // zero|hat|bump|disc_indicator|smoothed_disc|sine_product
    std::map<std::string, double> params;

    double get(const std::string& key, double fallback) const {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    }
    std::string describe() const;
};

/// Geometric frame the field parameters are interpreted in.
struct FieldFrame {
    double x0 = 0.0, x1 = 1.0;
    double y0 = 0.0, y1 = 1.0;
    int dim = 1;

    static FieldFrame from_mesh(const Mesh& mesh);
};

ScalarField make_scalar_field(const FieldSpec& spec, const FieldFrame& frame);

}  // namespace stvf
