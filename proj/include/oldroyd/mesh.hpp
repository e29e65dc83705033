#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>
#include <string>
#include <vector>

namespace oldroyd {

/// Structured triangulation of the unit square. Each of the n x n cells is
/// split into two triangles along the bottom-left -> top-right diagonal, so
/// there are 2n^2 triangles and (n+1)^2 vertices. Meshes are immutable after
/// construction and nest exactly under uniform (red) refinement.
struct Mesh {
  int n = 0;      ///< subdivisions per axis
  int level = 0;  ///< refinement depth from the mesh this one was refined from
  std::vector<Eigen::Vector2d> vertices;       ///< row-major: id = iy*(n+1)+ix
  std::vector<std::array<int, 3>> triangles;   ///< CCW vertex triples
  std::vector<bool> boundary_vertex;           ///< true iff a coordinate is 0 or 1
  std::vector<int> parent_triangle;            ///< ancestor ids, empty for a root mesh

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
  double mesh_size() const { return 1.0 / n; }

  /// Signed area of triangle t (positive for the CCW orientation invariant).
  double signed_area(int t) const;

  /// Vertex coordinates of triangle t as columns.
  Eigen::Matrix2d edge_matrix(int t) const;  ///< columns (v1-v0, v2-v0)
};

Mesh build_unit_square(int n);

/// Red refinement: every triangle splits into four via edge midpoints. The
/// result has 2n subdivisions per axis and records each fine triangle's
/// parent in `parent_triangle`.
Mesh refine_uniform(const Mesh& m);

struct Location {
  int triangle = -1;
  std::array<double, 3> bary{};  ///< barycentric coordinates, sum to 1
};

/// Find a coarse triangle containing p (p must lie in the closed unit square)
/// and the barycentric coordinates of p within it. With a `hint` (a known
/// ancestor triangle id) the lookup skips the structured search.
Location locate_in_coarse(const Eigen::Vector2d& p, const Mesh& coarse,
                          std::optional<int> hint = std::nullopt);

/// Ancestor of a fine triangle in a coarser mesh of the same hierarchy.
/// Requires fine.n = coarse.n * 2^k for some k >= 0.
int coarse_ancestor(const Mesh& fine, int fine_triangle, const Mesh& coarse);

/// Legacy-ASCII VTK dump of the triangulation (no fields).
void write_vtk(const Mesh& m, const std::string& path);

}  // namespace oldroyd
