#pragma once

#include <string>
#include <vector>

#include "oldroyd/fespace.hpp"

namespace oldroyd {

/// Velocity (point vectors) and pressure (point scalars) on the mesh
/// vertices, legacy-ASCII VTK unstructured grid.
void write_vtk_fields(const FESpace& space, const Eigen::VectorXd& u, const Eigen::VectorXd& p,
                      const std::string& path);

std::string format_double(double x);  ///< shortest round-trip decimal form

/// Comma-separated, header row, '.' decimal separator, UTF-8.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace oldroyd
