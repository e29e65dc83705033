#include "oldroyd/fespace.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace oldroyd {

namespace {

void push_orbit3(QuadratureRule& r, double a, double w) {
  // orbit of (1-2a, a, a)
  const double b = 1.0 - 2.0 * a;
  r.points.push_back({b, a, a});
  r.points.push_back({a, b, a});
  r.points.push_back({a, a, b});
  for (int i = 0; i < 3; ++i) r.weights.push_back(w);
}

void push_orbit6(QuadratureRule& r, double a, double b, double w) {
  const double c = 1.0 - a - b;
  r.points.push_back({a, b, c});
  r.points.push_back({a, c, b});
  r.points.push_back({b, a, c});
  r.points.push_back({b, c, a});
  r.points.push_back({c, a, b});
  r.points.push_back({c, b, a});
  for (int i = 0; i < 6; ++i) r.weights.push_back(w);
}

// 6-point Gauss-Legendre on [0,1].
constexpr double kGL6x[6] = {0.03376524289842399, 0.16939530676686776, 0.38069040695840156,
                             0.61930959304159844, 0.83060469323313224, 0.96623475710157601};
constexpr double kGL6w[6] = {0.08566224618958517, 0.18038078652406930, 0.23395696728634552,
                             0.23395696728634552, 0.18038078652406930, 0.08566224618958517};

// Collapsed-square product rule, positive weights, exact to degree 10.
QuadratureRule duffy_rule(int degree) {
  QuadratureRule r;
  r.degree = degree;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      const double xi = kGL6x[i], eta = kGL6x[j];
      const double x = xi * (1.0 - eta), y = eta;
      r.points.push_back({1.0 - x - y, x, y});
      r.weights.push_back(kGL6w[i] * kGL6w[j] * (1.0 - eta));
    }
  }
  return r;
}

}  // namespace

QuadratureRule quadrature_rule(int degree) {
  if (degree < 1 || degree > 10)
    throw std::invalid_argument("quadrature_rule: degree must be in [1, 10]");
  QuadratureRule r;
  r.degree = degree;
  switch (degree) {
    case 1:
      r.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
      r.weights.push_back(1.0);
      break;
    case 2:
      push_orbit3(r, 1.0 / 6.0, 1.0 / 3.0);
      break;
    case 3:
    case 4:
      push_orbit3(r, 0.44594849091596489, 0.22338158967801147);
      push_orbit3(r, 0.09157621350977074, 0.10995174365532187);
      break;
    case 5:
      r.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
      r.weights.push_back(0.225);
      push_orbit3(r, 0.47014206410511509, 0.13239415278850618);
      push_orbit3(r, 0.10128650732345634, 0.12593918054482715);
      break;
    case 6:
      push_orbit3(r, 0.24928674517091042, 0.11678627572637936);
      push_orbit3(r, 0.06308901449150223, 0.05084490637020681);
      push_orbit6(r, 0.05314504984481695, 0.31035245103378439, 0.08285107561837358);
      break;
    case 7:
    case 8:
      r.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
      r.weights.push_back(0.14431560767778717);
      push_orbit3(r, 0.45929258829272316, 0.09509163426728462);
      push_orbit3(r, 0.17056930775176021, 0.10321737053471825);
      push_orbit3(r, 0.05054722831703098, 0.03245849762319808);
      push_orbit6(r, 0.00839477740995761, 0.26311282963463811, 0.02723031417443499);
      break;
    default:
      return duffy_rule(degree);
  }
  // area-coordinate weights above sum to 1; scale to the reference area
  for (double& w : r.weights) w *= 0.5;
  return r;
}

namespace {

constexpr double kBubbleScale = 27.0;  // 27*l1*l2*l3 = 1 at the centroid

int local_size_for(ElementKind kind) {
  switch (kind) {
    case ElementKind::MINI: return 4;
    case ElementKind::TAYLOR_HOOD: return 6;
    case ElementKind::P1_P1: return 3;
  }
  return 0;
}

// Reference-gradient rows for the barycentric coordinates in (xi, eta).
const Eigen::Matrix<double, 3, 2>& bary_ref_grads() {
  static const Eigen::Matrix<double, 3, 2> g = [] {
    Eigen::Matrix<double, 3, 2> m;
    m << -1, -1, 1, 0, 0, 1;
    return m;
  }();
  return g;
}

void eval_scalar_basis_ref(ElementKind kind, const std::array<double, 3>& l,
                           Eigen::VectorXd& values, Eigen::MatrixX2d& ref_grads) {
  const auto& dl = bary_ref_grads();
  const int nl = local_size_for(kind);
  values.resize(nl);
  ref_grads.resize(nl, 2);
  for (int i = 0; i < 3; ++i) {
    if (kind == ElementKind::TAYLOR_HOOD) {
      values[i] = l[i] * (2.0 * l[i] - 1.0);
      ref_grads.row(i) = (4.0 * l[i] - 1.0) * dl.row(i);
    } else {
      values[i] = l[i];
      ref_grads.row(i) = dl.row(i);
    }
  }
  if (kind == ElementKind::MINI) {
    values[3] = kBubbleScale * l[0] * l[1] * l[2];
    ref_grads.row(3) = kBubbleScale * (l[1] * l[2] * dl.row(0) + l[0] * l[2] * dl.row(1) +
                                       l[0] * l[1] * dl.row(2));
  } else if (kind == ElementKind::TAYLOR_HOOD) {
    static const int ea[3] = {0, 1, 2}, eb[3] = {1, 2, 0};
    for (int e = 0; e < 3; ++e) {
      const int a = ea[e], b = eb[e];
      values[3 + e] = 4.0 * l[a] * l[b];
      ref_grads.row(3 + e) = 4.0 * (l[b] * dl.row(a) + l[a] * dl.row(b));
    }
  }
}

}  // namespace

FESpace::FESpace(const Mesh& mesh, ElementKind kind) : mesh_(&mesh), kind_(kind) {
  const int nv = mesh.num_vertices();
  const int nt = mesh.num_triangles();
  local_size_ = local_size_for(kind);
  pressure_dofs_ = nv;
  element_dofs_.resize(size_t(nt) * local_size_);

  if (kind == ElementKind::MINI) {
    scalar_dofs_ = nv + nt;
    for (int t = 0; t < nt; ++t) {
      const auto& tri = mesh.triangles[t];
      int* d = &element_dofs_[size_t(t) * 4];
      d[0] = tri[0]; d[1] = tri[1]; d[2] = tri[2]; d[3] = nv + t;
    }
  } else if (kind == ElementKind::TAYLOR_HOOD) {
    // Edges numbered lexicographically by their sorted vertex pair.
    std::map<std::pair<int, int>, int> edge_id;
    for (int t = 0; t < nt; ++t) {
      const auto& tri = mesh.triangles[t];
      static const int ea[3] = {0, 1, 2}, eb[3] = {1, 2, 0};
      for (int e = 0; e < 3; ++e) {
        auto key = std::minmax(tri[ea[e]], tri[eb[e]]);
        edge_id.emplace(key, 0);
      }
    }
    int next = 0;
    for (auto& [key, id] : edge_id) id = next++;
    edge_midpoints_.resize(edge_id.size());
    for (const auto& [key, id] : edge_id)
      edge_midpoints_[id] = 0.5 * (mesh.vertices[key.first] + mesh.vertices[key.second]);
    scalar_dofs_ = nv + static_cast<int>(edge_id.size());
    for (int t = 0; t < nt; ++t) {
      const auto& tri = mesh.triangles[t];
      int* d = &element_dofs_[size_t(t) * 6];
      d[0] = tri[0]; d[1] = tri[1]; d[2] = tri[2];
      static const int ea[3] = {0, 1, 2}, eb[3] = {1, 2, 0};
      for (int e = 0; e < 3; ++e) {
        auto key = std::minmax(tri[ea[e]], tri[eb[e]]);
        d[3 + e] = nv + edge_id.at(key);
      }
    }
  } else {  // P1_P1
    scalar_dofs_ = nv;
    for (int t = 0; t < nt; ++t) {
      const auto& tri = mesh.triangles[t];
      int* d = &element_dofs_[size_t(t) * 3];
      d[0] = tri[0]; d[1] = tri[1]; d[2] = tri[2];
    }
  }

  // Boundary flags per scalar dof; bubbles are always interior, edge dofs
  // are boundary iff both edge endpoints are (true on these meshes exactly
  // when the midpoint lies on the boundary).
  scalar_on_boundary_.assign(scalar_dofs_, false);
  for (int v = 0; v < nv; ++v) scalar_on_boundary_[v] = mesh.boundary_vertex[v];
  if (kind == ElementKind::TAYLOR_HOOD) {
    for (size_t e = 0; e < edge_midpoints_.size(); ++e) {
      const auto& p = edge_midpoints_[e];
      scalar_on_boundary_[nv + e] =
          p.x() == 0.0 || p.x() == 1.0 || p.y() == 0.0 || p.y() == 1.0;
    }
  }

  dof_info_.reserve(2 * scalar_dofs_);
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < scalar_dofs_; ++i) {
      DofInfo info;
      if (i < nv) {
        info = {EntityKind::VERTEX, i, c};
      } else if (kind == ElementKind::MINI) {
        info = {EntityKind::CELL_BUBBLE, i - nv, c};
      } else {
        info = {EntityKind::EDGE, i - nv, c};
      }
      dof_info_.push_back(info);
    }
  }

  interior_velocity_.reserve(2 * scalar_dofs_);
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < scalar_dofs_; ++i)
      if (!scalar_on_boundary_[i]) interior_velocity_.push_back(c * scalar_dofs_ + i);
}

FESpace build_space(const Mesh& mesh, ElementKind kind) { return FESpace(mesh, kind); }

int FESpace::assembly_degree() const {
  switch (kind_) {
    case ElementKind::MINI: return 8;          // bubble x grad x bubble
    case ElementKind::TAYLOR_HOOD: return 5;   // P2 x grad(P2) x P2
    case ElementKind::P1_P1: return 4;
  }
  return 4;
}

void FESpace::eval_basis(int t, const std::array<double, 3>& bary,
                         Eigen::VectorXd& values, Eigen::MatrixX2d& gradients) const {
  if (t < 0 || t >= mesh_->num_triangles())
    throw std::invalid_argument("eval_basis: invalid triangle id");
  Eigen::MatrixX2d ref_grads;
  eval_scalar_basis_ref(kind_, bary, values, ref_grads);
  const Eigen::Matrix2d Jinv = mesh_->edge_matrix(t).inverse();
  gradients = ref_grads * Jinv;  // grad_phys = J^-T grad_ref, as row vectors
}

Eigen::Vector2d FESpace::physical_point(int t, const std::array<double, 3>& bary) const {
  const auto& tri = mesh_->triangles[t];
  return bary[0] * mesh_->vertices[tri[0]] + bary[1] * mesh_->vertices[tri[1]] +
         bary[2] * mesh_->vertices[tri[2]];
}

Eigen::VectorXd FESpace::interpolate(
    const std::function<Eigen::Vector2d(const Eigen::Vector2d&)>& field) const {
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(velocity_dofs());
  const int nv = mesh_->num_vertices();
  for (int v = 0; v < nv; ++v) {
    const Eigen::Vector2d val = field(mesh_->vertices[v]);
    coeffs[v] = val.x();
    coeffs[scalar_dofs_ + v] = val.y();
  }
  if (kind_ == ElementKind::TAYLOR_HOOD) {
    for (size_t e = 0; e < edge_midpoints_.size(); ++e) {
      const Eigen::Vector2d val = field(edge_midpoints_[e]);
      coeffs[nv + int(e)] = val.x();
      coeffs[scalar_dofs_ + nv + int(e)] = val.y();
    }
  } else if (kind_ == ElementKind::MINI) {
    for (int t = 0; t < mesh_->num_triangles(); ++t) {
      const auto& tri = mesh_->triangles[t];
      const Eigen::Vector2d c =
          (mesh_->vertices[tri[0]] + mesh_->vertices[tri[1]] + mesh_->vertices[tri[2]]) / 3.0;
      const Eigen::Vector2d val = field(c);
      for (int comp = 0; comp < 2; ++comp) {
        const double p1_at_c = (coeffs[comp * scalar_dofs_ + tri[0]] +
                                coeffs[comp * scalar_dofs_ + tri[1]] +
                                coeffs[comp * scalar_dofs_ + tri[2]]) / 3.0;
        coeffs[comp * scalar_dofs_ + nv + t] = val[comp] - p1_at_c;
      }
    }
  }
  return coeffs;
}

Eigen::VectorXd FESpace::interpolate_pressure(
    const std::function<double(const Eigen::Vector2d&)>& field) const {
  Eigen::VectorXd coeffs(pressure_dofs_);
  for (int v = 0; v < mesh_->num_vertices(); ++v) coeffs[v] = field(mesh_->vertices[v]);
  return coeffs;
}

const FESpace::BasisTable& FESpace::basis_table(int degree) const {
  for (const auto& t : table_cache_)
    if (t->rule.degree == degree) return *t;
  auto table = std::make_shared<BasisTable>();
  table->rule = quadrature_rule(degree);
  const int n = mesh_->n;
  table->jacobian = 1.0 / (double(n) * double(n));
  // The two congruent shapes: lower J = [[1,1],[0,1]]/n, upper J = [[1,0],[1,1]]/n.
  Eigen::Matrix2d Jinv_lower, Jinv_upper;
  Jinv_lower << n, -n, 0, n;
  Jinv_upper << n, 0, -n, n;
  const Eigen::Matrix2d Jinv[2] = {Jinv_lower, Jinv_upper};
  const auto& dl = bary_ref_grads();
  for (int cls = 0; cls < 2; ++cls) {
    const int nq = table->rule.size();
    table->values[cls].resize(nq);
    table->gradients[cls].resize(nq);
    table->p1_values[cls].resize(nq);
    table->p1_gradients[cls].resize(nq);
    for (int q = 0; q < nq; ++q) {
      Eigen::VectorXd vals;
      Eigen::MatrixX2d ref_grads;
      eval_scalar_basis_ref(kind_, table->rule.points[q], vals, ref_grads);
      table->values[cls][q] = vals;
      table->gradients[cls][q] = ref_grads * Jinv[cls];
      Eigen::VectorXd p1(3);
      for (int i = 0; i < 3; ++i) p1[i] = table->rule.points[q][i];
      table->p1_values[cls][q] = p1;
      table->p1_gradients[cls][q] = dl * Jinv[cls];
    }
  }
  table_cache_.push_back(table);
  return *table_cache_.back();
}

}  // namespace oldroyd
