#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "oldroyd/stepping.hpp"
#include "oldroyd/verify.hpp"

using namespace oldroyd;

namespace {

struct Setup {
  Mesh mesh;
  FESpace space;
  AssembledOperators ops;
  Setup(int n, ElementKind kind = ElementKind::MINI)
      : mesh(build_unit_square(n)), space(mesh, kind), ops(assemble_operators(space)) {}
};

double l2_norm(const Vector& u, const AssembledOperators& ops) {
  return std::sqrt(std::max(0.0, u.dot(ops.M * u)));
}

// independent single-step oracle for the memory-free case: one implicit
// Euler step of the plain incompressible flow system, Picard-iterated with
// a dense bordered solve
State pure_navier_stokes_step(const State& s, const FESpace& space,
                              const AssembledOperators& ops, double mu, double dt,
                              double picard_tol, int picard_max) {
  const DofRestriction rest = DofRestriction::interior(space);
  const SparseMatrix Mi = rest.restrict_square(ops.M);
  const SparseMatrix Ai = rest.restrict_square(ops.A);
  const SparseMatrix Bi = rest.restrict_cols(ops.B);
  const Vector mp1 = ops.Mp * Vector::Ones(space.pressure_dofs());
  const int ni = rest.size(), np = space.pressure_dofs();
  const Vector rhs_u = rest.gather(ops.M * ((1.0 / dt) * s.u));

  Vector w = s.u;
  Vector u_full = s.u, p = s.p;
  for (int it = 0; it < picard_max; ++it) {
    const SparseMatrix Ni = rest.restrict_square(assemble_oseen_matrix(w, space));
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(ni + np + 1, ni + np + 1);
    D.topLeftCorner(ni, ni) = Eigen::MatrixXd(SparseMatrix((1.0 / dt) * Mi + mu * Ai + Ni));
    const Eigen::MatrixXd Bd(Bi);
    D.block(ni, 0, np, ni) = Bd;
    D.block(0, ni, ni, np) = -Bd.transpose();
    D.block(ni, ni + np, np, 1) = mp1;
    D.block(ni + np, ni, 1, np) = mp1.transpose();
    Vector rhs = Vector::Zero(ni + np + 1);
    rhs.head(ni) = rhs_u;
    const Vector sol = Eigen::PartialPivLU<Eigen::MatrixXd>(D).solve(rhs);
    u_full = rest.scatter(sol.head(ni), space.velocity_dofs());
    p = sol.segment(ni, np);
    const double incr = (u_full - w).norm();
    w = u_full;
    if (incr <= picard_tol * std::max(u_full.norm(), 1e-300)) break;
  }
  State out = s;
  out.t += dt;
  out.u = u_full;
  out.p = p;
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("stepping");

TEST_CASE("scheme validation") {
  TimeScheme bad;
  bad.dt = 0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad.dt = 0.1;
  bad.picard_tol = 1e-3;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad.picard_tol = 1e-10;
  bad.picard_max = 0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("zero data stays identically zero") {
  Setup s(4);
  const OldroydParams params = derive_params(1.0, 0.5, 1.0);
  TimeScheme scheme;
  scheme.dt = 0.05;
  GalerkinStepper stepper(s.space, s.ops, params, scheme, KernelRule::RIGHT_RECT,
                          SolverConfig{}, nullptr);
  State st = stepper.initial_state(nullptr);
  for (int k = 0; k < 5; ++k) stepper.step(st);
  CHECK(st.u.norm() == 0.0);
  CHECK(st.p.norm() == 0.0);
  CHECK(st.t == doctest::Approx(0.25));
}

TEST_CASE("unforced energy decays monotonically from rough data") {
  Setup s(8);
  const OldroydParams params = derive_params(1.0, 0.5, 1.0);
  TimeScheme scheme;
  scheme.dt = 0.02;
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Vector raw = Vector::Zero(s.space.velocity_dofs());
  for (int c = 0; c < 2; ++c)
    for (int v = 0; v < s.mesh.num_vertices(); ++v)
      if (!s.space.scalar_dof_on_boundary(v)) raw[c * s.space.scalar_dofs() + v] = unif(rng);

  GalerkinStepper stepper(s.space, s.ops, params, scheme, KernelRule::RIGHT_RECT,
                          SolverConfig{}, nullptr);
  State st = stepper.initial_state_discrete(raw);
  double prev = l2_norm(st.u, s.ops);
  const double initial = prev;
  for (int k = 0; k < 60; ++k) {
    stepper.step(st);
    const double now = l2_norm(st.u, s.ops);
    CHECK(now <= initial + 1e-10);
    prev = now;
  }
  CHECK(prev < 0.5 * initial);  // plenty of viscous decay over t = 1.2
}

TEST_CASE("disabling the kernel reproduces a plain flow step") {
  Setup s(4);
  // gamma = 0 is outside the physical parameter map; set coefficients directly
  OldroydParams params;
  params.mu = 1.0;
  params.gamma = 0.0;
  params.delta = 1.0;
  TimeScheme scheme;
  scheme.dt = 0.01;
  scheme.picard_tol = 1e-12;
  SolverConfig cfg;
  cfg.tolerance = 1e-12;

  const MMSCase mms = mms_case("default", derive_params(1.0, 0.5, 1.0));
  GalerkinStepper stepper(s.space, s.ops, params, scheme, KernelRule::RIGHT_RECT, cfg, nullptr);
  State st = stepper.initial_state(mms.velocity_fn());
  const State start = st;
  stepper.step(st);

  const State oracle =
      pure_navier_stokes_step(start, s.space, s.ops, params.mu, scheme.dt, 1e-12, 50);
  CHECK((st.u - oracle.u).norm() <= 1e-10 * std::max(1.0, oracle.u.norm()));
}

TEST_CASE("bdf2 needs a startup step and divergence stays small") {
  Setup s(8);
  const OldroydParams params = derive_params(1.0, 0.5, 1.0);
  const MMSCase mms = mms_case("default", params);
  RunSetup setup;
  setup.space = &s.space;
  setup.ops = &s.ops;
  setup.params = params;
  setup.scheme.kind = SchemeKind::BDF2;
  setup.scheme.dt = 0.025;
  setup.kernel_rule = KernelRule::PW_LINEAR_EXACT;
  setup.solver.tolerance = 1e-11;
  setup.forcing = mms.forcing_fn();
  setup.u0 = mms.velocity_fn();
  setup.T = 0.1;
  const SimulationResult res = run_simulation(setup);
  CHECK(res.final_state.t == doctest::Approx(0.1));
  CHECK_FALSE(res.solver_failed);
  for (const auto& d : res.diagnostics) CHECK(d.div_residual <= 1e-8);
}

TEST_CASE("temporal accuracy: implicit euler first order, bdf2 second order") {
  // same-mesh comparisons against a small-dt reference isolate the time error
  Setup s(8);
  const OldroydParams params = derive_params(1.0, 0.5, 1.0);
  const MMSCase mms = mms_case("default", params);
  const double T = 0.1;

  const auto run_dt = [&](SchemeKind kind, double dt) {
    RunSetup setup;
    setup.space = &s.space;
    setup.ops = &s.ops;
    setup.params = params;
    setup.scheme.kind = kind;
    setup.scheme.dt = dt;
    setup.scheme.picard_tol = 1e-12;
    setup.kernel_rule = KernelRule::PW_LINEAR_EXACT;
    setup.solver.tolerance = 1e-12;
    setup.forcing = mms.forcing_fn();
    setup.u0 = mms.velocity_fn();
    setup.T = T;
    return run_simulation(setup).final_state.u;
  };

  for (SchemeKind kind : {SchemeKind::IMPLICIT_EULER, SchemeKind::BDF2}) {
    const Vector ref = run_dt(kind, T / 64);
    const double e1 = (run_dt(kind, T / 4) - ref).norm();
    const double e2 = (run_dt(kind, T / 8) - ref).norm();
    const double expected = kind == SchemeKind::IMPLICIT_EULER ? 2.0 : 4.0;
    CHECK(e1 / e2 == doctest::Approx(expected).epsilon(0.25));
  }
}

TEST_CASE("run_simulation with T = 0 returns the projected initial state") {
  Setup s(4);
  const OldroydParams params = derive_params(1.0, 0.5, 1.0);
  const MMSCase mms = mms_case("default", params);
  RunSetup setup;
  setup.space = &s.space;
  setup.ops = &s.ops;
  setup.params = params;
  setup.scheme.dt = 0.1;
  setup.forcing = mms.forcing_fn();
  setup.u0 = mms.velocity_fn();
  setup.T = 0.0;
  const SimulationResult res = run_simulation(setup);
  CHECK(res.final_state.t == 0.0);
  CHECK(res.diagnostics.size() == 1);
  CHECK(res.final_state.u.norm() > 0.0);
  // T not a multiple of dt is a configuration error
  setup.T = 0.15;
  setup.scheme.dt = 0.1;
  CHECK_THROWS_AS(run_simulation(setup), std::invalid_argument);
}

TEST_CASE("mms error decreases under refinement (smoke)") {
  const OldroydParams params = derive_params(1.0, 0.5, 1.0);
  const MMSCase mms = mms_case("default", params);
  double prev_err = -1.0;
  for (int n : {8, 16}) {
    Setup s(n);
    RunSetup setup;
    setup.space = &s.space;
    setup.ops = &s.ops;
    setup.params = params;
    setup.scheme.dt = 1e-3;
    setup.kernel_rule = KernelRule::PW_LINEAR_EXACT;
    setup.forcing = mms.forcing_fn();
    setup.u0 = mms.velocity_fn();
    setup.T = 0.05;
    const SimulationResult res = run_simulation(setup);
    const ErrorNorms err = error_norms(res.final_state, mms, s.space, res.final_state.t);
    CHECK(std::isfinite(err.velocity_h1));
    if (prev_err > 0) CHECK(err.velocity_h1 < prev_err);
    prev_err = err.velocity_h1;
  }
}

TEST_SUITE_END();
