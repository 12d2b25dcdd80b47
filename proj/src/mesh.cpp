#include "stvf/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace stvf {

namespace {

double dist(const Point& a, const Point& b) {
    return std::hypot(b[0] - a[0], b[1] - a[1]);
}

double cross(const Point& o, const Point& a, const Point& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

}  // namespace

Domain Domain::interval(double a, double b) {
    Domain d;
    d.dim = 1;
    d.bounds = {{a, 0.0}, {b, 0.0}};
    d.validate();
    return d;
}

Domain Domain::rectangle(double x0, double y0, double x1, double y1) {
    Domain d;
    d.dim = 2;
    d.bounds = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
    d.validate();
    return d;
}

Domain Domain::polygon(std::vector<Point> vertices) {
    Domain d;
    d.dim = 2;
    d.bounds = std::move(vertices);
    d.validate();
    return d;
}

bool Domain::is_axis_aligned_rectangle() const {
    if (dim != 2 || bounds.size() != 4) return false;
    for (std::size_t i = 0; i < 4; ++i) {
        const Point& p = bounds[i];
        const Point& q = bounds[(i + 1) % 4];
        const bool horizontal = p[1] == q[1] && p[0] != q[0];
        const bool vertical = p[0] == q[0] && p[1] != q[1];
        if (!horizontal && !vertical) return false;
    }
    return true;
}

double Domain::measure() const {
    if (dim == 1) return bounds[1][0] - bounds[0][0];
    double twice_area = 0.0;
    for (std::size_t i = 0; i < bounds.size(); ++i) {
        const Point& p = bounds[i];
        const Point& q = bounds[(i + 1) % bounds.size()];
        twice_area += p[0] * q[1] - q[0] * p[1];
    }
    return 0.5 * std::abs(twice_area);
}

void Domain::validate() const {
    if (dim == 1) {
        if (bounds.size() != 2 || !(bounds[0][0] < bounds[1][0]))
            throw std::invalid_argument("Domain: 1D interval requires a < b");
        return;
    }
    if (dim != 2) throw std::invalid_argument("Domain: dim must be 1 or 2");
    const std::size_t n = bounds.size();
    if (n < 3) throw std::invalid_argument("Domain: polygon needs at least 3 vertices");
    // Convexity: cross products of consecutive edges must share sign.
    int sign = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = cross(bounds[i], bounds[(i + 1) % n], bounds[(i + 2) % n]);
        if (c == 0.0) continue;
        const int s = c > 0.0 ? 1 : -1;
        if (sign == 0) sign = s;
        else if (s != sign) throw std::invalid_argument("Domain: polygon is not convex");
    }
    if (sign == 0 || measure() <= 0.0)
        throw std::invalid_argument("Domain: polygon is degenerate (area must be positive)");
}

double Mesh::cell_measure(int cell) const {
    if (dim == 1) {
        const Point& a = vertices[cell_vertex(cell, 0)];
        const Point& b = vertices[cell_vertex(cell, 1)];
        return std::abs(b[0] - a[0]);
    }
    const Point& a = vertices[cell_vertex(cell, 0)];
    const Point& b = vertices[cell_vertex(cell, 1)];
    const Point& c = vertices[cell_vertex(cell, 2)];
    return 0.5 * std::abs(cross(a, b, c));
}

Point Mesh::cell_barycenter(int cell) const {
    Point bc{0.0, 0.0};
    const int npc = nodes_per_cell();
    for (int k = 0; k < npc; ++k) {
        const Point& p = vertices[cell_vertex(cell, k)];
        bc[0] += p[0] / npc;
        bc[1] += p[1] / npc;
    }
    return bc;
}

double Mesh::total_measure() const {
    double total = 0.0;
    for (int c = 0; c < n_cells(); ++c) total += cell_measure(c);
    return total;
}

void Mesh::finalize_metrics() {
    h_max = 0.0;
    h_min = std::numeric_limits<double>::infinity();
    const int npc = nodes_per_cell();
    for (int c = 0; c < n_cells(); ++c) {
        for (int i = 0; i < npc; ++i) {
            for (int j = i + 1; j < npc; ++j) {
                const double e = dist(vertices[cell_vertex(c, i)], vertices[cell_vertex(c, j)]);
                h_max = std::max(h_max, e);
                h_min = std::min(h_min, e);
            }
        }
    }
    kappa = h_max / h_min;
}

void Mesh::validate() const {
    if (dim != 1 && dim != 2) throw std::invalid_argument("Mesh: dim must be 1 or 2");
    if (static_cast<int>(boundary_vertex.size()) != n_vertices())
        throw std::invalid_argument("Mesh: boundary flag count mismatch");
    for (int idx : cell_nodes)
        if (idx < 0 || idx >= n_vertices())
            throw std::invalid_argument("Mesh: cell vertex index out of range");
    for (int c = 0; c < n_cells(); ++c)
        if (!(cell_measure(c) > 0.0))
            throw std::invalid_argument("Mesh: cell " + std::to_string(c) + " has non-positive measure");

    if (dim == 2) {
        // Conformity via edge incidence: interior edges in exactly 2 cells,
        // boundary edges in exactly 1.
        std::map<std::pair<int, int>, int> edge_count;
        for (int c = 0; c < n_cells(); ++c) {
            for (int k = 0; k < 3; ++k) {
                int a = cell_vertex(c, k), b = cell_vertex(c, (k + 1) % 3);
                if (a > b) std::swap(a, b);
                ++edge_count[{a, b}];
            }
        }
        for (const auto& [edge, count] : edge_count) {
            if (count > 2)
                throw std::invalid_argument("Mesh: edge shared by more than two cells (non-conforming)");
            if (count == 1 && !(boundary_vertex[edge.first] && boundary_vertex[edge.second]))
                throw std::invalid_argument("Mesh: boundary edge with interior endpoint flags");
        }
    }
}

std::shared_ptr<const Mesh> uniform_interval_mesh(const Domain& domain, int n_cells) {
    domain.validate();
    if (domain.dim != 1)
        throw std::invalid_argument("uniform_interval_mesh: domain must be one-dimensional");
    if (n_cells < 2)
        throw std::invalid_argument("uniform_interval_mesh: n_cells must be >= 2 (no interior node otherwise)");

    const double a = domain.bounds[0][0];
    const double b = domain.bounds[1][0];
    auto mesh = std::make_shared<Mesh>();
    mesh->dim = 1;
    mesh->vertices.resize(n_cells + 1);
    for (int i = 0; i <= n_cells; ++i)
        mesh->vertices[i] = {a + (b - a) * (static_cast<double>(i) / n_cells), 0.0};
    mesh->vertices.front() = {a, 0.0};
    mesh->vertices.back() = {b, 0.0};
    mesh->boundary_vertex.assign(n_cells + 1, 0);
    mesh->boundary_vertex.front() = 1;
    mesh->boundary_vertex.back() = 1;
    mesh->cell_nodes.reserve(2 * n_cells);
    for (int i = 0; i < n_cells; ++i) {
        mesh->cell_nodes.push_back(i);
        mesh->cell_nodes.push_back(i + 1);
    }
    mesh->vertex_parents.assign(mesh->n_vertices(), {-1, -1});
    mesh->finalize_metrics();
    mesh->validate();
    return mesh;
}

std::shared_ptr<const Mesh> structured_triangle_mesh(const Domain& domain, int n_x, int n_y) {
    domain.validate();
    if (domain.dim != 2 || !domain.is_axis_aligned_rectangle())
        throw std::invalid_argument(
            "structured_triangle_mesh: domain must be an axis-aligned rectangle; "
            "for a general convex polygon supply a coarse mesh file and refine it");
    if (n_x < 2 || n_y < 2)
        throw std::invalid_argument("structured_triangle_mesh: n_x and n_y must be >= 2");

    double x0 = domain.bounds[0][0], y0 = domain.bounds[0][1];
    double x1 = x0, y1 = y0;
    for (const Point& p : domain.bounds) {
        x0 = std::min(x0, p[0]);
        x1 = std::max(x1, p[0]);
        y0 = std::min(y0, p[1]);
        y1 = std::max(y1, p[1]);
    }

    auto mesh = std::make_shared<Mesh>();
    mesh->dim = 2;
    const int npx = n_x + 1, npy = n_y + 1;
    mesh->vertices.reserve(npx * npy);
    mesh->boundary_vertex.assign(npx * npy, 0);
    for (int j = 0; j < npy; ++j) {
        for (int i = 0; i < npx; ++i) {
            const double x = (i == n_x) ? x1 : x0 + (x1 - x0) * (static_cast<double>(i) / n_x);
            const double y = (j == n_y) ? y1 : y0 + (y1 - y0) * (static_cast<double>(j) / n_y);
            mesh->vertices.push_back({x, y});
            if (i == 0 || j == 0 || i == n_x || j == n_y)
                mesh->boundary_vertex[j * npx + i] = 1;
        }
    }
    auto vid = [npx](int i, int j) { return j * npx + i; };
    mesh->cell_nodes.reserve(6 * n_x * n_y);
    for (int j = 0; j < n_y; ++j) {
        for (int i = 0; i < n_x; ++i) {
            const int v00 = vid(i, j), v10 = vid(i + 1, j);
            const int v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
            // Same diagonal orientation in every quad.
            mesh->cell_nodes.insert(mesh->cell_nodes.end(), {v00, v10, v11});
            mesh->cell_nodes.insert(mesh->cell_nodes.end(), {v00, v11, v01});
        }
    }
    mesh->vertex_parents.assign(mesh->n_vertices(), {-1, -1});
    mesh->finalize_metrics();
    mesh->validate();
    return mesh;
}

std::shared_ptr<const Mesh> refine(const std::shared_ptr<const Mesh>& mesh) {
    if (!mesh) throw std::invalid_argument("refine: null mesh");
    mesh->validate();

    auto fine = std::make_shared<Mesh>();
    fine->dim = mesh->dim;
    fine->level = mesh->level + 1;
    fine->parent = mesh;
    fine->vertices = mesh->vertices;
    fine->boundary_vertex = mesh->boundary_vertex;
    fine->vertex_parents.resize(mesh->n_vertices());
    for (int v = 0; v < mesh->n_vertices(); ++v) fine->vertex_parents[v] = {v, -1};

    if (mesh->dim == 1) {
        fine->cell_nodes.reserve(4 * mesh->n_cells());
        for (int c = 0; c < mesh->n_cells(); ++c) {
            const int a = mesh->cell_vertex(c, 0);
            const int b = mesh->cell_vertex(c, 1);
            const int m = fine->n_vertices();
            const Point& pa = mesh->vertices[a];
            const Point& pb = mesh->vertices[b];
            fine->vertices.push_back({0.5 * (pa[0] + pb[0]), 0.0});
            fine->boundary_vertex.push_back(0);
            fine->vertex_parents.push_back({a, b});
            fine->cell_nodes.insert(fine->cell_nodes.end(), {a, m, m, b});
        }
    } else {
        // Edge incidence determines which midpoints lie on the boundary.
        std::map<std::pair<int, int>, int> edge_count;
        for (int c = 0; c < mesh->n_cells(); ++c) {
            for (int k = 0; k < 3; ++k) {
                int a = mesh->cell_vertex(c, k), b = mesh->cell_vertex(c, (k + 1) % 3);
                if (a > b) std::swap(a, b);
                ++edge_count[{a, b}];
            }
        }
        std::map<std::pair<int, int>, int> midpoint;
        auto midpoint_of = [&](int a, int b) {
            if (a > b) std::swap(a, b);
            auto it = midpoint.find({a, b});
            if (it != midpoint.end()) return it->second;
            const int m = fine->n_vertices();
            const Point& pa = mesh->vertices[a];
            const Point& pb = mesh->vertices[b];
            fine->vertices.push_back({0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])});
            fine->boundary_vertex.push_back(edge_count[{a, b}] == 1 ? 1 : 0);
            fine->vertex_parents.push_back({a, b});
            midpoint[{a, b}] = m;
            return m;
        };
        fine->cell_nodes.reserve(12 * mesh->n_cells());
        for (int c = 0; c < mesh->n_cells(); ++c) {
            const int v0 = mesh->cell_vertex(c, 0);
            const int v1 = mesh->cell_vertex(c, 1);
            const int v2 = mesh->cell_vertex(c, 2);
            const int m01 = midpoint_of(v0, v1);
            const int m12 = midpoint_of(v1, v2);
            const int m20 = midpoint_of(v2, v0);
            fine->cell_nodes.insert(fine->cell_nodes.end(), {v0, m01, m20});
            fine->cell_nodes.insert(fine->cell_nodes.end(), {v1, m12, m01});
            fine->cell_nodes.insert(fine->cell_nodes.end(), {v2, m20, m12});
            fine->cell_nodes.insert(fine->cell_nodes.end(), {m01, m12, m20});
        }
    }
    fine->finalize_metrics();
    fine->validate();
    return fine;
}

std::shared_ptr<const Mesh> read_mesh_text(std::istream& in) {
    auto fail = [](const std::string& what) -> std::shared_ptr<const Mesh> {
        throw std::invalid_argument("mesh text format: " + what);
    };
    int dim = 0, nv = 0, nc = 0;
    if (!(in >> dim >> nv >> nc)) return fail("missing 'dim n_vertices n_cells' header");
    if (dim != 1 && dim != 2) return fail("dim must be 1 or 2");
    if (nv <= 0 || nc <= 0) return fail("vertex/cell counts must be positive");

    auto mesh = std::make_shared<Mesh>();
    mesh->dim = dim;
    mesh->vertices.resize(nv, {0.0, 0.0});
    for (int v = 0; v < nv; ++v) {
        if (!(in >> mesh->vertices[v][0])) return fail("bad vertex line " + std::to_string(v));
        if (dim == 2 && !(in >> mesh->vertices[v][1])) return fail("bad vertex line " + std::to_string(v));
    }
    mesh->cell_nodes.resize(nc * (dim + 1));
    for (int i = 0; i < nc * (dim + 1); ++i)
        if (!(in >> mesh->cell_nodes[i])) return fail("bad cell line " + std::to_string(i / (dim + 1)));

    mesh->boundary_vertex.assign(nv, 0);
    std::string rest;
    std::getline(in, rest);  // finish the last cell line
    if (!std::getline(in, rest)) return fail("missing boundary vertex line");
    std::istringstream bs(rest);
    int bidx = 0;
    bool any = false;
    while (bs >> bidx) {
        if (bidx < 0 || bidx >= nv) return fail("boundary vertex index out of range");
        mesh->boundary_vertex[bidx] = 1;
        any = true;
    }
    if (!any) return fail("boundary vertex line is empty");

    mesh->vertex_parents.assign(nv, {-1, -1});
    mesh->finalize_metrics();
    mesh->validate();
    return mesh;
}

std::shared_ptr<const Mesh> read_mesh_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open mesh file: " + path);
    return read_mesh_text(in);
}

void write_mesh_text(std::ostream& out, const Mesh& mesh) {
    out.precision(17);
    out << mesh.dim << ' ' << mesh.n_vertices() << ' ' << mesh.n_cells() << '\n';
    for (const Point& p : mesh.vertices) {
        out << p[0];
        if (mesh.dim == 2) out << ' ' << p[1];
        out << '\n';
    }
    for (int c = 0; c < mesh.n_cells(); ++c) {
        for (int k = 0; k < mesh.nodes_per_cell(); ++k)
            out << (k ? " " : "") << mesh.cell_vertex(c, k);
        out << '\n';
    }
    bool first = true;
    for (int v = 0; v < mesh.n_vertices(); ++v) {
        if (!mesh.boundary_vertex[v]) continue;
        out << (first ? "" : " ") << v;
        first = false;
    }
    out << '\n';
}

bool is_refinement_descendant(const Mesh& descendant, const Mesh& ancestor) {
    const Mesh* m = &descendant;
    while (m) {
        if (m == &ancestor) return true;
        m = m->parent.get();
    }
    return false;
}

}  // namespace stvf
