#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <functional>

#include "oldroyd/fespace.hpp"

namespace oldroyd {

/// Compressed-sparse-row matrix (row-major Eigen sparse in compressed mode:
/// outer = row offsets, inner = strictly increasing column indices).
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// The bilinear forms of the mixed formulation, over ALL dofs (no boundary
/// elimination here; the solver module restricts to the interior set).
struct AssembledOperators {
  SparseMatrix M;   ///< velocity mass, (u, phi)
  SparseMatrix A;   ///< velocity stiffness, (grad u, grad phi)
  SparseMatrix B;   ///< divergence coupling, B(j,i) = (q_j, div phi_i)
  SparseMatrix Mp;  ///< pressure mass
  SparseMatrix Ap;  ///< pressure stiffness (Neumann), used by the Schur preconditioner
};

AssembledOperators assemble_operators(const FESpace& space);

/// r_i = b(v, w, phi_i) with the skew form b(v,w,phi) = 1/2 (v.grad w, phi) - 1/2 (v.grad phi, w).
Vector assemble_trilinear_vector(const Vector& v, const Vector& w, const FESpace& space);

/// N(w) with N_ij = b(w, phi_j, phi_i); N(w) u == assemble_trilinear_vector(w, u).
SparseMatrix assemble_oseen_matrix(const Vector& w, const FESpace& space);

/// (f(., t), phi_i) by quadrature at the error-norm degree.
Vector assemble_load(const std::function<Eigen::Vector2d(const Eigen::Vector2d&, double)>& f,
                     double t, const FESpace& space);

}  // namespace oldroyd
