#include "oldroyd/assembly.hpp"

#include <stdexcept>
#include <vector>

namespace oldroyd {

namespace {

using Triplet = Eigen::Triplet<double>;

SparseMatrix from_triplets(int rows, int cols, const std::vector<Triplet>& trip) {
  SparseMatrix m(rows, cols);
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  return m;
}

}  // namespace

AssembledOperators assemble_operators(const FESpace& space) {
  const Mesh& mesh = space.mesh();
  const int nl = space.local_scalar_size();
  const int ns = space.scalar_dofs();
  const int np = space.pressure_dofs();
  const auto& table = space.basis_table(space.assembly_degree());
  const int nq = table.rule.size();

  std::vector<Triplet> tm, ta, tb, tmp, tap;
  tm.reserve(size_t(mesh.num_triangles()) * nl * nl * 2);
  ta.reserve(tm.capacity());
  tb.reserve(size_t(mesh.num_triangles()) * 3 * nl * 2);
  tmp.reserve(size_t(mesh.num_triangles()) * 9);
  tap.reserve(size_t(mesh.num_triangles()) * 9);

  Eigen::MatrixXd m_loc(nl, nl), a_loc(nl, nl);
  Eigen::MatrixXd bx_loc(3, nl), by_loc(3, nl);
  Eigen::Matrix3d mp_loc, ap_loc;

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const int cls = FESpace::geometry_class(t);
    m_loc.setZero();
    a_loc.setZero();
    bx_loc.setZero();
    by_loc.setZero();
    mp_loc.setZero();
    ap_loc.setZero();
    for (int q = 0; q < nq; ++q) {
      const double w = table.rule.weights[q] * table.jacobian;
      const auto& phi = table.values[cls][q];
      const auto& dphi = table.gradients[cls][q];
      const auto& psi = table.p1_values[cls][q];
      const auto& dpsi = table.p1_gradients[cls][q];
      m_loc.noalias() += w * phi * phi.transpose();
      a_loc.noalias() += w * dphi * dphi.transpose();
      bx_loc.noalias() += w * psi * dphi.col(0).transpose();
      by_loc.noalias() += w * psi * dphi.col(1).transpose();
      mp_loc.noalias() += w * psi * psi.transpose();
      ap_loc.noalias() += w * dpsi * dpsi.transpose();
    }
    const int* dofs = space.element_dofs(t);
    const auto& pdofs = space.pressure_dofs_of(t);
    for (int i = 0; i < nl; ++i) {
      for (int j = 0; j < nl; ++j) {
        for (int c = 0; c < 2; ++c) {
          tm.emplace_back(c * ns + dofs[i], c * ns + dofs[j], m_loc(i, j));
          ta.emplace_back(c * ns + dofs[i], c * ns + dofs[j], a_loc(i, j));
        }
      }
    }
    for (int j = 0; j < 3; ++j) {
      for (int i = 0; i < nl; ++i) {
        tb.emplace_back(pdofs[j], dofs[i], bx_loc(j, i));
        tb.emplace_back(pdofs[j], ns + dofs[i], by_loc(j, i));
      }
      for (int k = 0; k < 3; ++k) {
        tmp.emplace_back(pdofs[j], pdofs[k], mp_loc(j, k));
        tap.emplace_back(pdofs[j], pdofs[k], ap_loc(j, k));
      }
    }
  }

  AssembledOperators ops;
  const int nu = 2 * ns;
  ops.M = from_triplets(nu, nu, tm);
  ops.A = from_triplets(nu, nu, ta);
  ops.B = from_triplets(np, nu, tb);
  ops.Mp = from_triplets(np, np, tmp);
  ops.Ap = from_triplets(np, np, tap);
  return ops;
}

Vector assemble_trilinear_vector(const Vector& v, const Vector& w, const FESpace& space) {
  const int ns = space.scalar_dofs();
  if (v.size() != 2 * ns || w.size() != 2 * ns)
    throw std::invalid_argument("assemble_trilinear_vector: dimension mismatch");
  const Mesh& mesh = space.mesh();
  const int nl = space.local_scalar_size();
  const auto& table = space.basis_table(space.assembly_degree());
  const int nq = table.rule.size();

  Vector r = Vector::Zero(2 * ns);
  Eigen::VectorXd v_loc_x(nl), v_loc_y(nl), w_loc_x(nl), w_loc_y(nl);
  Eigen::VectorXd r_loc_x(nl), r_loc_y(nl);

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const int cls = FESpace::geometry_class(t);
    const int* dofs = space.element_dofs(t);
    for (int i = 0; i < nl; ++i) {
      v_loc_x[i] = v[dofs[i]];
      v_loc_y[i] = v[ns + dofs[i]];
      w_loc_x[i] = w[dofs[i]];
      w_loc_y[i] = w[ns + dofs[i]];
    }
    r_loc_x.setZero();
    r_loc_y.setZero();
    for (int q = 0; q < nq; ++q) {
      const double qw = table.rule.weights[q] * table.jacobian;
      const auto& phi = table.values[cls][q];
      const auto& dphi = table.gradients[cls][q];
      const Eigen::Vector2d vq(phi.dot(v_loc_x), phi.dot(v_loc_y));
      const Eigen::Vector2d wq(phi.dot(w_loc_x), phi.dot(w_loc_y));
      // rows of grad w: (dwx/dx, dwx/dy), (dwy/dx, dwy/dy)
      const Eigen::Vector2d gwx = dphi.transpose() * w_loc_x;
      const Eigen::Vector2d gwy = dphi.transpose() * w_loc_y;
      const double conv_x = vq.dot(gwx);  // (v . grad) w_x
      const double conv_y = vq.dot(gwy);
      // v . grad phi_i, same for both components of the vector basis
      const Eigen::VectorXd vdphi = dphi * vq;
      r_loc_x.noalias() += (0.5 * qw) * (conv_x * phi - wq.x() * vdphi);
      r_loc_y.noalias() += (0.5 * qw) * (conv_y * phi - wq.y() * vdphi);
    }
    for (int i = 0; i < nl; ++i) {
      r[dofs[i]] += r_loc_x[i];
      r[ns + dofs[i]] += r_loc_y[i];
    }
  }
  return r;
}

SparseMatrix assemble_oseen_matrix(const Vector& w, const FESpace& space) {
  const int ns = space.scalar_dofs();
  if (w.size() != 2 * ns)
    throw std::invalid_argument("assemble_oseen_matrix: dimension mismatch");
  const Mesh& mesh = space.mesh();
  const int nl = space.local_scalar_size();
  const auto& table = space.basis_table(space.assembly_degree());
  const int nq = table.rule.size();

  std::vector<Triplet> trip;
  trip.reserve(size_t(mesh.num_triangles()) * nl * nl * 2);
  Eigen::VectorXd w_loc_x(nl), w_loc_y(nl);
  Eigen::MatrixXd n_loc(nl, nl);

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const int cls = FESpace::geometry_class(t);
    const int* dofs = space.element_dofs(t);
    for (int i = 0; i < nl; ++i) {
      w_loc_x[i] = w[dofs[i]];
      w_loc_y[i] = w[ns + dofs[i]];
    }
    n_loc.setZero();
    for (int q = 0; q < nq; ++q) {
      const double qw = table.rule.weights[q] * table.jacobian;
      const auto& phi = table.values[cls][q];
      const auto& dphi = table.gradients[cls][q];
      const Eigen::Vector2d wq(phi.dot(w_loc_x), phi.dot(w_loc_y));
      const Eigen::VectorXd wdphi = dphi * wq;  // (w . grad) phi_j
      // N_ij += qw/2 * [ (w.grad phi_j) phi_i - (w.grad phi_i) phi_j ]
      n_loc.noalias() += (0.5 * qw) * (phi * wdphi.transpose() - wdphi * phi.transpose());
    }
    for (int i = 0; i < nl; ++i)
      for (int j = 0; j < nl; ++j)
        for (int c = 0; c < 2; ++c)
          trip.emplace_back(c * ns + dofs[i], c * ns + dofs[j], n_loc(i, j));
  }
  return from_triplets(2 * ns, 2 * ns, trip);
}

Vector assemble_load(const std::function<Eigen::Vector2d(const Eigen::Vector2d&, double)>& f,
                     double t, const FESpace& space) {
  const int ns = space.scalar_dofs();
  Vector r = Vector::Zero(2 * ns);
  if (!f) return r;
  const Mesh& mesh = space.mesh();
  const int nl = space.local_scalar_size();
  const auto& table = space.basis_table(FESpace::kErrorNormDegree);
  const int nq = table.rule.size();

  for (int tri = 0; tri < mesh.num_triangles(); ++tri) {
    const int cls = FESpace::geometry_class(tri);
    const int* dofs = space.element_dofs(tri);
    for (int q = 0; q < nq; ++q) {
      const double qw = table.rule.weights[q] * table.jacobian;
      const auto& phi = table.values[cls][q];
      const Eigen::Vector2d x = space.physical_point(tri, table.rule.points[q]);
      const Eigen::Vector2d fq = f(x, t);
      for (int i = 0; i < nl; ++i) {
        r[dofs[i]] += qw * fq.x() * phi[i];
        r[ns + dofs[i]] += qw * fq.y() * phi[i];
      }
    }
  }
  return r;
}

}  // namespace oldroyd
