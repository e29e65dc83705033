#pragma once

#include <string>

#include "oldroyd/stepping.hpp"

namespace oldroyd {

/// Exact evaluation of a coarse-space field at the quadrature points of a
/// nested fine space: each fine element lies inside exactly one coarse
/// element, so the restriction of the coarse basis is polynomial there and
/// the evaluation carries no interpolation error. The geometric data (coarse
/// ancestor, basis values and gradients per quadrature point) is built once.
class CoarseFieldEval {
 public:
  CoarseFieldEval(const FESpace& coarse, const FESpace& fine, int quad_degree);

  const FESpace& coarse_space() const { return *coarse_; }
  int quad_degree() const { return degree_; }

  /// u_H value at fine element t, quadrature point q for coarse coeffs.
  Eigen::Vector2d value(const Vector& u_coarse, int t, int q) const;
  /// Gradient rows (du_i/dx_j) at the same point.
  Eigen::Matrix2d gradient(const Vector& u_coarse, int t, int q) const;

  /// Load vector r_i = b(u_H, u_H, phi_i) over all fine velocity dofs.
  Vector assemble_frozen_convection(const Vector& u_coarse, const FESpace& fine) const;

 private:
  const FESpace* coarse_;
  int degree_;
  int nq_ = 0, nlc_ = 0;
  std::vector<int> ancestor_;                 ///< per fine element
  std::vector<int> coarse_dofs_;              ///< [t][i] flattened
  std::vector<double> basis_values_;          ///< [t][q][i]
  std::vector<double> basis_gradients_;       ///< [t][q][i][2]
};

struct TwoLevelSetup {
  const FESpace* coarse_space = nullptr;
  const AssembledOperators* coarse_ops = nullptr;
  const FESpace* fine_space = nullptr;
  const AssembledOperators* fine_ops = nullptr;
  OldroydParams params;
  TimeScheme scheme;            ///< same dt on both levels
  KernelRule kernel_rule = KernelRule::RIGHT_RECT;
  SolverConfig solver;
  Forcing forcing;
  Forcing u0;
  const Vector* u0_discrete = nullptr;
  double T = 0.0;
  enum class FineInitial { PROJECT, PROLONG } fine_initial = FineInitial::PROJECT;
  std::string spill_path;  ///< non-empty: stream the coarse trajectory through this file
};

struct TwoLevelResult {
  State fine_state;
  SimulationResult coarse_run;
  std::vector<StepDiagnostics> fine_diagnostics;
  double coarse_ms = 0.0, transfer_ms = 0.0, fine_ms = 0.0;
  bool solver_failed = false;
};

/// First level: the standard nonlinear evolution on the coarse pair
/// (identical to run_simulation; the per-step coarse velocities are retained
/// for the second level through setup.recorder).
SimulationResult run_first_level(const RunSetup& setup);

/// Full two-level algorithm: nonlinear coarse solve, cross-mesh transfer,
/// linearized fine solve with the convection frozen at the time-aligned
/// coarse velocity. Requires fine.n = coarse.n * 2^k.
TwoLevelResult run_two_level(const TwoLevelSetup& setup);

}  // namespace oldroyd
