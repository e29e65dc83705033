#include "oldroyd/io.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace oldroyd {

void write_vtk_fields(const FESpace& space, const Eigen::VectorXd& u, const Eigen::VectorXd& p,
                      const std::string& path) {
  const Mesh& m = space.mesh();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_vtk_fields: cannot open " + path);
  out.precision(17);
  out << "# vtk DataFile Version 2.0\n"
      << "velocity and pressure\nASCII\nDATASET UNSTRUCTURED_GRID\n"
      << "POINTS " << m.num_vertices() << " double\n";
  for (const auto& v : m.vertices) out << v.x() << " " << v.y() << " 0\n";
  out << "CELLS " << m.num_triangles() << " " << 4 * m.num_triangles() << "\n";
  for (const auto& t : m.triangles) out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
  out << "CELL_TYPES " << m.num_triangles() << "\n";
  for (int t = 0; t < m.num_triangles(); ++t) out << "5\n";
  const int ns = space.scalar_dofs();
  out << "POINT_DATA " << m.num_vertices() << "\n"
      << "VECTORS velocity double\n";
  for (int v = 0; v < m.num_vertices(); ++v)
    out << u[v] << " " << u[ns + v] << " 0\n";
  out << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (int v = 0; v < m.num_vertices(); ++v) out << p[v] << "\n";
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

}  // namespace oldroyd
