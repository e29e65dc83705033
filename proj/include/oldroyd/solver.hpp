#pragma once

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <functional>
#include <memory>
#include <optional>

#include "oldroyd/assembly.hpp"

namespace oldroyd {

enum class SolveMethod { DIRECT_DENSE, UZAWA_CG };

struct SolverConfig {
  SolveMethod method = SolveMethod::UZAWA_CG;
  double tolerance = 1e-10;  ///< relative block-residual target, in (0, 1e-2]
  int max_iterations = 500;
};
void validate(const SolverConfig& cfg);

struct SolveStats {
  bool converged = false;
  int outer_iterations = 0;
  int inner_iterations = 0;
  double residual_momentum = 0.0;   ///< relative
  double residual_divergence = 0.0; ///< relative to ||u|| * max|B|
};

/// Selection of the interior (non-Dirichlet) velocity dofs of a space.
struct DofRestriction {
  std::vector<int> idx;
  std::vector<int> full_to_small;

  static DofRestriction interior(const FESpace& space);
  int size() const { return static_cast<int>(idx.size()); }
  Vector gather(const Vector& full) const;
  Vector scatter(const Vector& small, int full_size) const;
  SparseMatrix restrict_square(const SparseMatrix& m) const;
  SparseMatrix restrict_cols(const SparseMatrix& b) const;
};

/// Solver for the block system  K u - B^T p = f,  B u = g,  mean_Mp(p) = 0,
/// with K = K0 + N, K0 symmetric positive definite over the interior dofs and
/// N an optional skew convection matrix that may change between solves.
///
/// UZAWA_CG runs a Krylov iteration on the pressure Schur complement
/// B K^-1 B^T (CG when N is absent, BiCGStab otherwise), preconditioned by
/// theta*Mp^-1 + sigma*Ap^-1; K0 is factored once and applied directly or as
/// the preconditioner of the inner iteration. DIRECT_DENSE solves a bordered
/// dense system and is intended for small meshes and cross-checks.
class SaddleSolver {
 public:
  SaddleSolver(SparseMatrix K0, SparseMatrix B, const SparseMatrix& Mp,
               const SparseMatrix& Ap, double sigma, double theta, SolverConfig cfg);

  /// N must be the interior-restricted convection matrix; pass nullptr to clear.
  /// The pointer is kept, not copied.
  void set_skew(const SparseMatrix* N) { N_ = N; }

  std::pair<Vector, Vector> solve(const Vector& f, const Vector& g, SolveStats& stats,
                                  const Vector* pressure_warm_start = nullptr) const;

  const SparseMatrix& K0() const { return K0_; }
  const SparseMatrix& B() const { return B_; }

 private:
  Vector solve_velocity_block(const Vector& b, int& inner_iters) const;
  Vector apply_schur_preconditioner(const Vector& r) const;
  Vector solve_pressure_mass(const Vector& r) const;
  Vector solve_pressure_poisson(const Vector& r) const;
  void mean_zero(Vector& p) const;

  SolverConfig cfg_;
  SparseMatrix K0_, B_, BT_;
  const SparseMatrix* N_ = nullptr;
  double sigma_ = 0.0, theta_ = 0.0;
  double b_scale_ = 1.0;
  Vector mp_ones_;       ///< Mp * 1
  double mp_total_ = 0;  ///< 1^T Mp 1
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_K0_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_Mp_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_Ap_bordered_;
  friend std::pair<Vector, Vector> solve_saddle_direct(const SaddleSolver&, const Vector&,
                                                       const Vector&, SolveStats&);
};

/// One-shot description of a saddle system for the free-function interface.
struct SaddleSystem {
  const SparseMatrix* K0 = nullptr;  ///< SPD part, interior dofs
  const SparseMatrix* N = nullptr;   ///< optional skew part
  const SparseMatrix* B = nullptr;   ///< divergence coupling, restricted columns
  const SparseMatrix* Mp = nullptr;
  const SparseMatrix* Ap = nullptr;
  double sigma = 0.0;  ///< mass coefficient inside K0 (preconditioner hint)
  double theta = 1.0;  ///< stiffness coefficient inside K0
  Vector rhs_u, rhs_p;
};

std::pair<Vector, Vector> solve_saddle(const SaddleSystem& sys, const SolverConfig& cfg,
                                       SolveStats& stats);

/// L^2 projection onto the discretely divergence-free subspace: solves
/// M u + B^T q = (field, phi), B u = 0. Returns full velocity coefficients
/// (zero on the boundary). Used for all initial data.
Vector l2_project_divfree(const std::function<Eigen::Vector2d(const Eigen::Vector2d&)>& field,
                          const FESpace& space, const AssembledOperators& ops,
                          const SolverConfig& cfg, SolveStats* stats = nullptr);

/// Projection of an existing coefficient vector (rhs = M * coeffs).
Vector l2_project_divfree_discrete(const Vector& coeffs, const FESpace& space,
                                   const AssembledOperators& ops, const SolverConfig& cfg,
                                   SolveStats* stats = nullptr);

struct InfSupEstimate {
  double value = 0.0;  ///< approximation of the LBB constant
  bool warning = false;
  int iterations = 0;
};

/// Smallest generalized singular value of the pressure Schur complement
/// B A^-1 B^T relative to the pressure mass matrix (constants deflated),
/// computed by inverse power iteration; approximates the inf-sup constant.
InfSupEstimate estimate_infsup(const FESpace& space);

}  // namespace oldroyd
