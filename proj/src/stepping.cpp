#include "oldroyd/stepping.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace oldroyd {

void validate(const TimeScheme& scheme) {
  if (!(scheme.dt > 0)) throw std::invalid_argument("time.dt must be positive");
  if (!(scheme.picard_tol > 0 && scheme.picard_tol <= 1e-4))
    throw std::invalid_argument("time.picard_tol must be in (0, 1e-4]");
  if (scheme.picard_max < 1) throw std::invalid_argument("time.picard_max must be >= 1");
}

GalerkinStepper::GalerkinStepper(const FESpace& space, const AssembledOperators& ops,
                                 const OldroydParams& params, const TimeScheme& scheme,
                                 KernelRule rule, const SolverConfig& solver_cfg,
                                 Forcing forcing)
    : space_(space),
      ops_(ops),
      params_(params),
      scheme_(scheme),
      rule_(rule),
      solver_cfg_(solver_cfg),
      forcing_(std::move(forcing)),
      rest_(DofRestriction::interior(space)) {
  validate(scheme_);
  validate(solver_cfg_);
  Mi_ = rest_.restrict_square(ops.M);
  Ai_ = rest_.restrict_square(ops.A);
  Bi_ = rest_.restrict_cols(ops.B);
}

State GalerkinStepper::initial_state(const Forcing& u0) const {
  State s;
  s.t = 0.0;
  if (u0) {
    s.u = l2_project_divfree([&](const Eigen::Vector2d& x) { return u0(x, 0.0); }, space_,
                             ops_, solver_cfg_);
  } else {
    s.u = Vector::Zero(space_.velocity_dofs());
  }
  s.p = Vector::Zero(space_.pressure_dofs());
  s.kernel = KernelState::zero(space_.velocity_dofs(), &s.u);
  return s;
}

State GalerkinStepper::initial_state_discrete(const Vector& u0_coeffs) const {
  State s;
  s.t = 0.0;
  s.u = l2_project_divfree_discrete(u0_coeffs, space_, ops_, solver_cfg_);
  s.p = Vector::Zero(space_.pressure_dofs());
  s.kernel = KernelState::zero(space_.velocity_dofs(), &s.u);
  return s;
}

GalerkinStepper::StepSystem GalerkinStepper::prepare_step(const State& s) {
  const double dt = scheme_.dt;
  const bool bdf2 = scheme_.kind == SchemeKind::BDF2 && have_prev_;
  const double sigma = bdf2 ? 1.5 / dt : 1.0 / dt;
  const KernelWeights kw = kernel_weights(rule_, params_.gamma, params_.delta, dt);
  const double theta = params_.mu + kw.w_new;

  std::unique_ptr<SaddleSolver>& solver = bdf2 ? solver_bdf2_ : solver_euler_;
  if (!solver) {
    SparseMatrix K0 = sigma * Mi_ + theta * Ai_;
    solver = std::make_unique<SaddleSolver>(std::move(K0), Bi_, ops_.Mp, ops_.Ap, sigma,
                                            theta, solver_cfg_);
  }

  // time-derivative history part
  Vector rhs_full;
  if (bdf2) {
    rhs_full = ops_.M * ((2.0 / dt) * s.u - (0.5 / dt) * u_prev_);
  } else {
    rhs_full = ops_.M * ((1.0 / dt) * s.u);
  }
  // decayed memory history (the new sample's weight sits in the matrix)
  Vector hist = kw.decay * s.kernel.accumulator;
  if (kw.w_prev != 0.0) hist += kw.w_prev * s.kernel.prev_sample;
  rhs_full -= ops_.A * hist;
  if (forcing_) rhs_full += assemble_load(forcing_, s.t + dt, space_);

  StepSystem sys{solver.get(), sigma, rest_.gather(rhs_full)};
  return sys;
}

void GalerkinStepper::finish_step(State& s, const Vector& u_interior, const Vector& p,
                                  int picard_iters, bool picard_ok) {
  const Vector u_old = s.u;
  s.u = rest_.scatter(u_interior, space_.velocity_dofs());
  s.p = p;
  kernel_update(s.kernel, s.u, scheme_.dt, rule_, params_);
  s.t += scheme_.dt;
  s.picard_iterations = picard_iters;
  s.picard_converged = picard_ok;
  u_prev_ = u_old;
  have_prev_ = true;
  p_warm_ = p;
}

void GalerkinStepper::step(State& s) {
  StepSystem sys = prepare_step(s);
  const bool extrapolate = scheme_.kind == SchemeKind::BDF2 && have_prev_;
  Vector w = extrapolate ? Vector(2.0 * s.u - u_prev_) : s.u;

  Vector u_int, p;
  int iters = 0;
  bool converged = false;
  const Vector zero_p = Vector::Zero(space_.pressure_dofs());
  SparseMatrix N_int;
  while (iters < scheme_.picard_max) {
    ++iters;
    const SparseMatrix N_full = assemble_oseen_matrix(w, space_);
    N_int = rest_.restrict_square(N_full);
    sys.solver->set_skew(&N_int);
    std::tie(u_int, p) = sys.solver->solve(sys.rhs_time_and_memory, zero_p, last_stats_,
                                           p_warm_.size() ? &p_warm_ : nullptr);
    if (!last_stats_.converged) solver_failed_ = true;
    p_warm_ = p;
    const Vector u_full = rest_.scatter(u_int, space_.velocity_dofs());
    const double incr = (u_full - w).norm();
    w = u_full;
    if (incr <= scheme_.picard_tol * std::max(u_full.norm(), 1e-300)) {
      converged = true;
      break;
    }
  }
  sys.solver->set_skew(nullptr);
  finish_step(s, u_int, p, iters, converged);
}

State step_galerkin(const State& s, const FESpace& space, const AssembledOperators& ops,
                    const OldroydParams& params, const TimeScheme& scheme, KernelRule rule,
                    const SolverConfig& solver_cfg, const Forcing& f) {
  GalerkinStepper stepper(space, ops, params, scheme, rule, solver_cfg, f);
  State out = s;
  stepper.step(out);
  return out;
}

void LinearizedStepper::step_linearized(State& s, const Vector& frozen_convection) {
  StepSystem sys = prepare_step(s);
  sys.rhs_time_and_memory -= rest_.gather(frozen_convection);
  const Vector zero_p = Vector::Zero(space_.pressure_dofs());
  auto [u_int, p] = sys.solver->solve(sys.rhs_time_and_memory, zero_p, last_stats_,
                                      p_warm_.size() ? &p_warm_ : nullptr);
  if (!last_stats_.converged) solver_failed_ = true;
  finish_step(s, u_int, p, 0, true);
}

SimulationResult run_simulation(const RunSetup& setup) {
  if (!setup.space || !setup.ops) throw std::invalid_argument("run_simulation: missing space/ops");
  validate(setup.scheme);
  const double dt = setup.scheme.dt;
  const long nsteps = std::lround(setup.T / dt);
  if (std::abs(nsteps * dt - setup.T) > 1e-9 * std::max(1.0, setup.T))
    throw std::invalid_argument("run_simulation: T must be an integer multiple of dt");

  const auto t0 = std::chrono::steady_clock::now();
  GalerkinStepper stepper(*setup.space, *setup.ops, setup.params, setup.scheme,
                          setup.kernel_rule, setup.solver, setup.forcing);
  SimulationResult result;
  State s = setup.u0_discrete ? stepper.initial_state_discrete(*setup.u0_discrete)
                              : stepper.initial_state(setup.u0);

  const auto diag = [&](const State& st) {
    StepDiagnostics d;
    d.t = st.t;
    d.energy = std::sqrt(std::max(0.0, st.u.dot(setup.ops->M * st.u)));
    d.picard_iterations = st.picard_iterations;
    d.picard_converged = st.picard_converged;
    d.kernel_norm =
        std::sqrt(std::max(0.0, st.kernel.accumulator.dot(setup.ops->M * st.kernel.accumulator)));
    return d;
  };
  const SparseMatrix Bi = stepper.restriction().restrict_cols(setup.ops->B);
  const auto div_of = [&](const State& st) {
    return (Bi * stepper.restriction().gather(st.u)).norm();
  };

  StepDiagnostics d0 = diag(s);
  d0.div_residual = div_of(s);
  result.diagnostics.push_back(d0);
  if (setup.recorder) setup.recorder(0, s);

  for (long n = 0; n < nsteps; ++n) {
    stepper.step(s);
    StepDiagnostics d = diag(s);
    d.div_residual = div_of(s);
    result.diagnostics.push_back(d);
    result.picard_total += s.picard_iterations;
    if (!s.picard_converged) ++result.picard_failures;
    if (setup.recorder) setup.recorder(static_cast<int>(n + 1), s);
  }
  result.solver_failed = stepper.solver_failed();
  result.final_state = std::move(s);
  result.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                       .count();
  return result;
}

}  // namespace oldroyd
