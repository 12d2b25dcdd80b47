#pragma once

#include <vector>

#include "stvf/mesh.hpp"

namespace stvf {

struct QuadPoint {
    Point x;
    double weight;
};

/// n-point Gauss-Legendre rule on [0,1] (exact for degree 2n-1).
std::vector<QuadPoint> gauss_legendre_unit(int n_points);

/// Quadrature points on a physical cell. `order` is the number of Gauss
/// points per direction: segments get the n-point rule, triangles an
/// n x n Duffy (collapsed square) rule.
std::vector<QuadPoint> cell_quadrature(const Mesh& mesh, int cell, int order);

}  // namespace stvf
