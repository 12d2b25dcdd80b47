#include "stvf/fields.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace stvf {

std::string FieldSpec::describe() const {
    std::ostringstream os;
    os << name;
    for (const auto& [k, v] : params) os << ' ' << k << '=' << v;
    return os.str();
}

FieldFrame FieldFrame::from_mesh(const Mesh& mesh) {
    FieldFrame f;
    f.dim = mesh.dim;
    f.x0 = f.x1 = mesh.vertices[0][0];
    f.y0 = f.y1 = mesh.vertices[0][1];
    for (const Point& p : mesh.vertices) {
        f.x0 = std::min(f.x0, p[0]);
        f.x1 = std::max(f.x1, p[0]);
        f.y0 = std::min(f.y0, p[1]);
        f.y1 = std::max(f.y1, p[1]);
    }
    return f;
}

ScalarField make_scalar_field(const FieldSpec& spec, const FieldFrame& frame) {
    const double amp = spec.get("amplitude", 1.0);
    const double cx = spec.get("center_x", 0.5 * (frame.x0 + frame.x1));
    const double cy = spec.get("center_y", 0.5 * (frame.y0 + frame.y1));
    const bool two_d = frame.dim == 2;

    if (spec.name == "zero") {
        return [](double, double) { return 0.0; };
    }
    if (spec.name == "hat") {
        const double w = spec.get("width", 0.25 * (frame.x1 - frame.x0));
        if (!(w > 0.0)) throw std::invalid_argument("field hat: width must be positive");
        return [=](double x, double y) {
            double v = std::max(0.0, 1.0 - std::abs(x - cx) / w);
            if (two_d) v *= std::max(0.0, 1.0 - std::abs(y - cy) / w);
            return amp * v;
        };
    }
    if (spec.name == "bump") {
        const double w = spec.get("width", 0.25 * (frame.x1 - frame.x0));
        if (!(w > 0.0)) throw std::invalid_argument("field bump: width must be positive");
        return [=](double x, double y) {
            const double dy = two_d ? y - cy : 0.0;
            const double r2 = ((x - cx) * (x - cx) + dy * dy) / (w * w);
            if (r2 >= 1.0) return 0.0;
            return amp * std::exp(1.0 - 1.0 / (1.0 - r2));
        };
    }
    if (spec.name == "disc_indicator") {
        const double r = spec.get("radius", 0.25 * (frame.x1 - frame.x0));
        if (!(r > 0.0)) throw std::invalid_argument("field disc_indicator: radius must be positive");
        return [=](double x, double y) {
            const double dy = two_d ? y - cy : 0.0;
            const double dist = std::hypot(x - cx, dy);
            return dist <= r ? amp : 0.0;
        };
    }
    if (spec.name == "smoothed_disc") {
        const double r = spec.get("radius", 0.25 * (frame.x1 - frame.x0));
        const double w = spec.get("width", 0.1 * (frame.x1 - frame.x0));
        if (!(r > 0.0) || !(w > 0.0))
            throw std::invalid_argument("field smoothed_disc: radius and width must be positive");
        return [=](double x, double y) {
            const double dy = two_d ? y - cy : 0.0;
            const double dist = std::hypot(x - cx, dy);
            // C^1 ramp from 1 inside radius r - w/2 to 0 outside r + w/2
            const double s = std::clamp((r + 0.5 * w - dist) / w, 0.0, 1.0);
            return amp * s * s * (3.0 - 2.0 * s);
        };
    }
    if (spec.name == "sine_product") {
        const double kx = spec.get("modes_x", 1.0);
        const double ky = spec.get("modes_y", 1.0);
        const double lx = frame.x1 - frame.x0;
        const double ly = frame.y1 - frame.y0;
        return [=](double x, double y) {
            double v = std::sin(kx * M_PI * (x - frame.x0) / lx);
            if (two_d) v *= std::sin(ky * M_PI * (y - frame.y0) / ly);
            return amp * v;
        };
    }
    throw std::invalid_argument("unknown field name '" + spec.name +
                                "' (expected zero|hat|bump|disc_indicator|smoothed_disc|sine_product)");
}

}  // namespace stvf
