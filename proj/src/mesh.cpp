#include "oldroyd/mesh.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace oldroyd {

double Mesh::signed_area(int t) const {
  const auto& tri = triangles.at(t);
  const Eigen::Vector2d a = vertices[tri[0]];
  const Eigen::Vector2d b = vertices[tri[1]];
  const Eigen::Vector2d c = vertices[tri[2]];
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

Eigen::Matrix2d Mesh::edge_matrix(int t) const {
  const auto& tri = triangles.at(t);
  Eigen::Matrix2d J;
  J.col(0) = vertices[tri[1]] - vertices[tri[0]];
  J.col(1) = vertices[tri[2]] - vertices[tri[0]];
  return J;
}

Mesh build_unit_square(int n) {
  if (n < 1) throw std::invalid_argument("build_unit_square: n must be >= 1");
  Mesh m;
  m.n = n;
  m.level = 0;
  const int nv = (n + 1) * (n + 1);
  m.vertices.reserve(nv);
  m.boundary_vertex.reserve(nv);
  for (int iy = 0; iy <= n; ++iy) {
    for (int ix = 0; ix <= n; ++ix) {
      m.vertices.emplace_back(double(ix) / double(n), double(iy) / double(n));
      m.boundary_vertex.push_back(ix == 0 || ix == n || iy == 0 || iy == n);
    }
  }
  m.triangles.reserve(2 * n * n);
  const auto vid = [n](int ix, int iy) { return iy * (n + 1) + ix; };
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      const int v00 = vid(ix, iy), v10 = vid(ix + 1, iy);
      const int v01 = vid(ix, iy + 1), v11 = vid(ix + 1, iy + 1);
      m.triangles.push_back({v00, v10, v11});  // lower: below the diagonal
      m.triangles.push_back({v00, v11, v01});  // upper
    }
  }
  return m;
}

namespace {

// Ancestor of a triangle of an n_f mesh inside an n_c mesh, n_f = r * n_c.
int ancestor_structured(int fine_tri, int n_f, int n_c) {
  const int cell = fine_tri / 2;
  const bool lower = (fine_tri % 2) == 0;
  const int ix = cell % n_f, iy = cell / n_f;
  // fine-triangle centroid in global coordinates
  const double cx = (ix + (lower ? 2.0 : 1.0) / 3.0) / n_f;
  const double cy = (iy + (lower ? 1.0 : 2.0) / 3.0) / n_f;
  const int IX = std::min(int(cx * n_c), n_c - 1);
  const int IY = std::min(int(cy * n_c), n_c - 1);
  const double xi = cx * n_c - IX, eta = cy * n_c - IY;
  const int coarse_cell = IY * n_c + IX;
  return 2 * coarse_cell + (eta <= xi ? 0 : 1);
}

}  // namespace

Mesh refine_uniform(const Mesh& m) {
  Mesh fine = build_unit_square(2 * m.n);
  fine.level = m.level + 1;
  fine.parent_triangle.resize(fine.num_triangles());
  for (int t = 0; t < fine.num_triangles(); ++t)
    fine.parent_triangle[t] = ancestor_structured(t, fine.n, m.n);
  return fine;
}

int coarse_ancestor(const Mesh& fine, int fine_triangle, const Mesh& coarse) {
  if (fine_triangle < 0 || fine_triangle >= fine.num_triangles())
    throw std::invalid_argument("coarse_ancestor: invalid triangle id");
  int r = fine.n / coarse.n;
  if (coarse.n * r != fine.n || (r & (r - 1)) != 0)
    throw std::invalid_argument("coarse_ancestor: meshes are not nested (need n_f = n_c * 2^k)");
  return ancestor_structured(fine_triangle, fine.n, coarse.n);
}

namespace {

std::array<double, 3> bary_in_triangle(const Eigen::Vector2d& p, const Mesh& m, int t) {
  const auto& tri = m.triangles[t];
  const Eigen::Vector2d a = m.vertices[tri[0]];
  const Eigen::Matrix2d J = m.edge_matrix(t);
  const Eigen::Vector2d xi = J.inverse() * (p - a);
  return {1.0 - xi.x() - xi.y(), xi.x(), xi.y()};
}

void clamp_bary(std::array<double, 3>& b) {
  for (double& v : b) {
    if (v < 0.0 && v > -1e-12) v = 0.0;
    if (v > 1.0 && v < 1.0 + 1e-12) v = 1.0;
  }
}

}  // namespace

Location locate_in_coarse(const Eigen::Vector2d& p, const Mesh& coarse,
                          std::optional<int> hint) {
  if (p.x() < -1e-14 || p.x() > 1.0 + 1e-14 || p.y() < -1e-14 || p.y() > 1.0 + 1e-14)
    throw std::domain_error("locate_in_coarse: point outside the closed unit square");
  Location loc;
  if (hint) {
    if (*hint < 0 || *hint >= coarse.num_triangles())
      throw std::invalid_argument("locate_in_coarse: invalid ancestor hint");
    loc.triangle = *hint;
    loc.bary = bary_in_triangle(p, coarse, loc.triangle);
    clamp_bary(loc.bary);
    if (loc.bary[0] < -1e-9 || loc.bary[1] < -1e-9 || loc.bary[2] < -1e-9)
      throw std::invalid_argument("locate_in_coarse: hint triangle does not contain the point");
    return loc;
  }
  const int n = coarse.n;
  const int ix = std::clamp(int(p.x() * n), 0, n - 1);
  const int iy = std::clamp(int(p.y() * n), 0, n - 1);
  const double xi = p.x() * n - ix, eta = p.y() * n - iy;
  const int cell = iy * n + ix;
  loc.triangle = 2 * cell + (eta <= xi ? 0 : 1);
  loc.bary = bary_in_triangle(p, coarse, loc.triangle);
  clamp_bary(loc.bary);
  return loc;
}

void write_vtk(const Mesh& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_vtk: cannot open " + path);
  out << "# vtk DataFile Version 2.0\n"
      << "triangulation\nASCII\nDATASET UNSTRUCTURED_GRID\n"
      << "POINTS " << m.num_vertices() << " double\n";
  out.precision(17);
  for (const auto& v : m.vertices) out << v.x() << " " << v.y() << " 0\n";
  out << "CELLS " << m.num_triangles() << " " << 4 * m.num_triangles() << "\n";
  for (const auto& t : m.triangles) out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
  out << "CELL_TYPES " << m.num_triangles() << "\n";
  for (int t = 0; t < m.num_triangles(); ++t) out << "5\n";
}

}  // namespace oldroyd
