#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "oldroyd/kernel.hpp"
#include "oldroyd/solver.hpp"

namespace oldroyd {

using Forcing = std::function<Eigen::Vector2d(const Eigen::Vector2d&, double)>;

/// Velocity/pressure coefficients at a time level plus the memory accumulator.
struct State {
  double t = 0.0;
  Vector u;  ///< full velocity dofs (zero on the boundary)
  Vector p;
  KernelState kernel;
  bool picard_converged = true;
  int picard_iterations = 0;
};

enum class SchemeKind { IMPLICIT_EULER, BDF2 };

struct TimeScheme {
  SchemeKind kind = SchemeKind::IMPLICIT_EULER;
  double dt = 1e-2;
  double picard_tol = 1e-10;
  int picard_max = 50;
};
void validate(const TimeScheme& scheme);

/// Implicit stepper for the nonlinear evolution: each step solves
///   (sigma M + (mu + w_new) A + N(w)) u - B^T p = sigma-part + (f,phi) - A*history,
///   B u = 0,
/// iterating w <- u (Picard) until the velocity increment is small. The
/// memory term enters implicitly through the new sample's kernel weight and
/// explicitly through the decayed accumulator. BDF2 starts with one
/// implicit-Euler step. A stepper instance drives one trajectory.
class GalerkinStepper {
 public:
  GalerkinStepper(const FESpace& space, const AssembledOperators& ops,
                  const OldroydParams& params, const TimeScheme& scheme, KernelRule rule,
                  const SolverConfig& solver_cfg, Forcing forcing);

  /// t = 0 state with u = P_h(u0) (u0 null means zero initial data).
  State initial_state(const Forcing& u0) const;
  State initial_state_discrete(const Vector& u0_coeffs) const;

  void step(State& s);

  const DofRestriction& restriction() const { return rest_; }
  const SolveStats& last_solve_stats() const { return last_stats_; }
  bool solver_failed() const { return solver_failed_; }

 protected:
  struct StepSystem {
    SaddleSolver* solver;
    double sigma;
    Vector rhs_time_and_memory;  ///< interior rhs without convection
  };
  StepSystem prepare_step(const State& s);
  void finish_step(State& s, const Vector& u_interior, const Vector& p, int picard_iters,
                   bool picard_ok);

  const FESpace& space_;
  const AssembledOperators& ops_;
  OldroydParams params_;
  TimeScheme scheme_;
  KernelRule rule_;
  SolverConfig solver_cfg_;
  Forcing forcing_;
  DofRestriction rest_;
  SparseMatrix Mi_, Ai_, Bi_;
  std::unique_ptr<SaddleSolver> solver_euler_, solver_bdf2_;
  Vector u_prev_;  ///< u^{n-1} once two levels exist
  bool have_prev_ = false;
  Vector p_warm_;
  SolveStats last_stats_;
  bool solver_failed_ = false;
};

/// One-step interface matching the nonlinear scheme (free-function form).
State step_galerkin(const State& s, const FESpace& space, const AssembledOperators& ops,
                    const OldroydParams& params, const TimeScheme& scheme, KernelRule rule,
                    const SolverConfig& solver_cfg, const Forcing& f);

/// Stepper for the linearized second-level evolution: the convection enters
/// only through a fixed load with entries b(u_H, u_H, phi_i) supplied per
/// step; the memory term uses this trajectory's own history. No Picard loop.
class LinearizedStepper : public GalerkinStepper {
 public:
  using GalerkinStepper::GalerkinStepper;
  /// frozen_convection: load vector over all velocity dofs at the new time.
  void step_linearized(State& s, const Vector& frozen_convection);
};

struct StepDiagnostics {
  double t = 0.0;
  double energy = 0.0;        ///< ||u||_{L^2}
  double div_residual = 0.0;  ///< ||B u|| over interior dofs
  int picard_iterations = 0;
  double kernel_norm = 0.0;   ///< ||accumulator||_{L^2}
  bool picard_converged = true;
};

struct SimulationResult {
  State final_state;
  std::vector<StepDiagnostics> diagnostics;  ///< per accepted step (including t=0)
  int picard_total = 0;
  int picard_failures = 0;
  bool solver_failed = false;
  double wall_ms = 0.0;
};

struct RunSetup {
  const FESpace* space = nullptr;
  const AssembledOperators* ops = nullptr;
  OldroydParams params;
  TimeScheme scheme;
  KernelRule kernel_rule = KernelRule::RIGHT_RECT;
  SolverConfig solver;
  Forcing forcing;  ///< null = zero
  Forcing u0;       ///< null = zero initial data
  const Vector* u0_discrete = nullptr;  ///< wins over u0 when set
  double T = 0.0;
  std::function<void(int, const State&)> recorder;  ///< called at step 0..N
};

/// Integrates from t=0 (initial data projected onto the divergence-free
/// subspace) to T, recording per-step diagnostics. Picard failures are
/// accumulated, not fatal.
SimulationResult run_simulation(const RunSetup& setup);

}  // namespace oldroyd
