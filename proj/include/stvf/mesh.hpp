#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace stvf {

using Point = std::array<double, 2>;

/// Computational domain: an interval (dim 1) or a convex polygon (dim 2).
struct Domain {
    int dim = 1;
    std::vector<Point> bounds;  // 1D: {{a,0},{b,0}}; 2D: ordered polygon vertices

    static Domain interval(double a, double b);
    static Domain rectangle(double x0, double y0, double x1, double y1);
    static Domain polygon(std::vector<Point> vertices);

    bool is_axis_aligned_rectangle() const;
    double measure() const;
    void validate() const;
};

/// Conforming simplicial mesh with nested-refinement lineage.
///
/// Vertices of a refined mesh are the parent's vertices (same indices)
/// followed by edge midpoints; `vertex_parents[v]` records either
/// {v_parent, -1} for an inherited vertex or the two parent endpoints of
/// the bisected edge. Meshes are immutable after construction.
class Mesh {
public:
    int dim = 1;
    std::vector<Point> vertices;
    std::vector<int> cell_nodes;  // flattened, dim+1 indices per cell
    std::vector<char> boundary_vertex;
    std::vector<std::array<int, 2>> vertex_parents;
    int level = 0;
    std::shared_ptr<const Mesh> parent;
    double h_max = 0.0;
    double h_min = 0.0;
    double kappa = 1.0;  // recorded quasi-uniformity witness h_max/h_min

    int n_vertices() const { return static_cast<int>(vertices.size()); }
    int n_cells() const { return static_cast<int>(cell_nodes.size()) / (dim + 1); }
    int nodes_per_cell() const { return dim + 1; }
    int cell_vertex(int cell, int k) const { return cell_nodes[cell * (dim + 1) + k]; }

    double cell_measure(int cell) const;
    Point cell_barycenter(int cell) const;
    double total_measure() const;

    /// Consistency checks: positive measures, index ranges, conformity
    /// (every 2D edge shared by at most two cells, boundary edges by one).
    void validate() const;

private:
    friend std::shared_ptr<const Mesh> uniform_interval_mesh(const Domain&, int);
    friend std::shared_ptr<const Mesh> structured_triangle_mesh(const Domain&, int, int);
    friend std::shared_ptr<const Mesh> refine(const std::shared_ptr<const Mesh>&);
    friend std::shared_ptr<const Mesh> read_mesh_text(std::istream&);
    void finalize_metrics();
};

std::shared_ptr<const Mesh> uniform_interval_mesh(const Domain& domain, int n_cells);
std::shared_ptr<const Mesh> structured_triangle_mesh(const Domain& domain, int n_x, int n_y);
std::shared_ptr<const Mesh> refine(const std::shared_ptr<const Mesh>& mesh);

/// Coarse-mesh text format: `dim n_vertices n_cells`, one vertex per line,
/// one cell per line (0-based indices), one line of boundary vertex indices.
std::shared_ptr<const Mesh> read_mesh_text(std::istream& in);
std::shared_ptr<const Mesh> read_mesh_text_file(const std::string& path);
void write_mesh_text(std::ostream& out, const Mesh& mesh);

/// True if `descendant` equals `ancestor` or was produced from it by
/// repeated refine(); identity is by object, not by geometry.
bool is_refinement_descendant(const Mesh& descendant, const Mesh& ancestor);

}  // namespace stvf
