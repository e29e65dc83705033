#pragma once

#include <Eigen/Core>
#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "oldroyd/mesh.hpp"

namespace oldroyd {

/// Mixed velocity/pressure element pairs. MINI and TAYLOR_HOOD satisfy the
/// discrete inf-sup condition on these meshes; P1_P1 is a deliberately
/// unstable equal-order pair kept for inf-sup diagnostics only.
enum class ElementKind { MINI, TAYLOR_HOOD, P1_P1 };

/// Quadrature rule on the reference triangle {(x,y): x,y >= 0, x+y <= 1},
/// points in barycentric coordinates, weights summing to the reference
/// area 1/2. Exact for polynomials up to `degree`.
struct QuadratureRule {
  int degree = 0;
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
  int size() const { return static_cast<int>(points.size()); }
};

/// Positive-weight rule exact to the requested degree, 1 <= degree <= 10.
QuadratureRule quadrature_rule(int degree);

enum class EntityKind { VERTEX, EDGE, CELL_BUBBLE };

struct DofInfo {
  EntityKind entity_kind;
  int entity;     ///< vertex id / edge id / triangle id
  int component;  ///< 0 or 1 for velocity, -1 for pressure
};

struct VectorField {
  std::function<Eigen::Vector2d(const Eigen::Vector2d&, double)> f;
  double t = 0.0;
  Eigen::Vector2d operator()(const Eigen::Vector2d& x) const { return f(x, t); }
};

/// Mixed finite element space on a structured mesh. Velocity coefficients
/// are component-blocked: dof (c, i) -> c * scalar_dofs + i, where i runs
/// over scalar velocity entities (vertices first, then bubbles/edges).
/// Pressure is continuous P1 on the mesh vertices for every kind.
class FESpace {
 public:
  FESpace(const Mesh& mesh, ElementKind kind);

  const Mesh& mesh() const { return *mesh_; }
  ElementKind kind() const { return kind_; }

  int scalar_dofs() const { return scalar_dofs_; }          ///< per velocity component
  int velocity_dofs() const { return 2 * scalar_dofs_; }
  int pressure_dofs() const { return pressure_dofs_; }
  int local_scalar_size() const { return local_size_; }     ///< scalar basis fns per element

  /// Global scalar dof ids of element t (size local_scalar_size()).
  const int* element_dofs(int t) const { return &element_dofs_[size_t(t) * local_size_]; }

  /// Pressure (P1) dof ids of element t = its vertex ids.
  const std::array<int, 3>& pressure_dofs_of(int t) const { return mesh_->triangles[t]; }

  bool scalar_dof_on_boundary(int i) const { return scalar_on_boundary_[i]; }
  const std::vector<int>& interior_velocity_dofs() const { return interior_velocity_; }
  const std::vector<DofInfo>& velocity_dof_info() const { return dof_info_; }

  /// Values and physical gradients of all local scalar shape functions at a
  /// barycentric point of element t.
  void eval_basis(int t, const std::array<double, 3>& bary,
                  Eigen::VectorXd& values, Eigen::MatrixX2d& gradients) const;

  /// Nodal interpolation of a vector field (one value per component dof;
  /// MINI bubble coefficients match the field at the element centroid after
  /// subtracting the P1 part).
  Eigen::VectorXd interpolate(const std::function<Eigen::Vector2d(const Eigen::Vector2d&)>& field) const;

  /// Same for a scalar field on the pressure space.
  Eigen::VectorXd interpolate_pressure(const std::function<double(const Eigen::Vector2d&)>& field) const;

  /// Default quadrature degree for assembled forms of this element kind
  /// (exact for every polynomial integrand that the forms produce).
  int assembly_degree() const;
  static constexpr int kErrorNormDegree = 8;

  /// Precomputed per-geometry-class basis data at the points of a rule.
  /// Structured meshes have two congruent element shapes (lower/upper), so
  /// physical gradients depend only on the class.
  struct BasisTable {
    QuadratureRule rule;
    double jacobian = 0.0;  ///< |det J|, equal for all elements
    // [class][qpoint]: values (nl), gradients (nl x 2), physical point offset
    std::array<std::vector<Eigen::VectorXd>, 2> values;
    std::array<std::vector<Eigen::MatrixX2d>, 2> gradients;
    std::array<std::vector<Eigen::VectorXd>, 2> p1_values;  ///< pressure basis
    std::array<std::vector<Eigen::Matrix<double, 3, 2>>, 2> p1_gradients;
  };
  /// Table for the given quadrature degree, built once and cached.
  const BasisTable& basis_table(int degree) const;

  /// Geometry class of element t: 0 = lower, 1 = upper.
  static int geometry_class(int t) { return t % 2; }

  /// Physical coordinates of a barycentric point of element t.
  Eigen::Vector2d physical_point(int t, const std::array<double, 3>& bary) const;

 private:
  const Mesh* mesh_;
  ElementKind kind_;
  int scalar_dofs_ = 0;
  int pressure_dofs_ = 0;
  int local_size_ = 0;
  std::vector<int> element_dofs_;
  std::vector<bool> scalar_on_boundary_;
  std::vector<int> interior_velocity_;
  std::vector<DofInfo> dof_info_;
  std::vector<Eigen::Vector2d> edge_midpoints_;  // TAYLOR_HOOD only
  mutable std::vector<std::shared_ptr<BasisTable>> table_cache_;
};

FESpace build_space(const Mesh& mesh, ElementKind kind);

}  // namespace oldroyd
