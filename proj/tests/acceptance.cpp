// Acceptance suite: one test case per criterion, each printing a PASS/FAIL
// line. The convergence cases run the same studies the CLI exposes through
// --mode convergence/compare --check.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <iostream>
#include <random>

#include "oldroyd/cli.hpp"

using namespace oldroyd;

namespace {

void report(const std::string& tag, bool pass, const std::string& details) {
  std::cout << "[ACCEPTANCE] " << tag << ": " << (pass ? "PASS" : "FAIL") << " (" << details
            << ")" << std::endl;
  CHECK_MESSAGE(pass, tag, ": ", details);
}

RunConfig study_config() {
  RunConfig cfg;
  cfg.params = derive_params(1.0, 0.5, 1.0);
  cfg.element = ElementKind::MINI;
  cfg.scheme.kind = SchemeKind::BDF2;
  cfg.scheme.dt = 5e-4;
  cfg.scheme.picard_tol = 1e-10;
  cfg.T = 0.25;
  cfg.kernel_rule = KernelRule::PW_LINEAR_EXACT;
  cfg.solver.tolerance = 1e-10;
  cfg.solver.max_iterations = 1000;
  cfg.mms_id = "default";
  cfg.initial = "mms";
  cfg.jobs = 0;
  return cfg;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// high-resolution Gauss-Legendre quadrature of the memory integral
double memory_integral_numeric(double gamma, double delta, double t) {
  static const int m = 64;
  static std::vector<double> nodes, weights;
  if (nodes.empty()) {
    nodes.resize(m);
    weights.resize(m);
    for (int i = 0; i < m; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (m + 0.5));
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= m; ++k) {
          const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        const double dp = m * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-15) {
          nodes[i] = x;
          weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
          break;
        }
      }
    }
  }
  double q = 0.0;
  for (int i = 0; i < m; ++i) {
    const double s = 0.5 * t * (nodes[i] + 1.0);
    q += 0.5 * t * weights[i] * gamma * std::exp(-delta * (t - s)) * std::exp(-s);
  }
  return q;
}

}  // namespace

TEST_CASE("[c01] manufactured-solution residual gate") {
  const OldroydParams params = derive_params(1.0, 0.5, 1.0);
  const MMSCase c = mms_case("default", params);
  std::mt19937 rng(2025);
  std::uniform_real_distribution<double> ux(0.0, 1.0), ut(0.01, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Eigen::Vector2d x(ux(rng), ux(rng));
    const double t = ut(rng);
    const Eigen::Vector2d lap_spatial = c.velocity_laplacian(x, t) / std::exp(-t);
    const Eigen::Vector2d res =
        c.velocity_dt(x, t) + c.velocity_gradient(x, t) * c.velocity(x, t) -
        params.mu * c.velocity_laplacian(x, t) -
        memory_integral_numeric(params.gamma, params.delta, t) * lap_spatial +
        c.pressure_gradient(x, t) - c.forcing(x, t);
    worst = std::max(worst, res.lpNorm<Eigen::Infinity>());
  }
  report("C1 momentum residual <= 1e-10 at 100 random samples", worst <= 1e-10,
         "max residual " + fmt(worst));
}

TEST_CASE("[c02] spatial convergence of the nonlinear method") {
  RunConfig cfg = study_config();
  cfg.study = "galerkin";
  cfg.levels = {8, 16, 32};
  const ConvergenceReport rep = run_convergence_study(cfg);
  REQUIRE(rep.galerkin.valid);
  const bool ok_l2 = rep.galerkin.l2u >= 1.7 && rep.galerkin.l2u <= 2.3;
  const bool ok_h1 = rep.galerkin.h1u >= 0.8 && rep.galerkin.h1u <= 1.2;
  const bool ok_p = rep.galerkin.l2p >= 0.7 && rep.galerkin.l2p <= 1.3;
  report("C2 velocity L2 order in [1.7, 2.3]", ok_l2 && !rep.solver_failed,
         "fitted " + fmt(rep.galerkin.l2u));
  report("C2 velocity H1 order in [0.8, 1.2]", ok_h1, "fitted " + fmt(rep.galerkin.h1u));
  report("C2 pressure L2 order in [0.7, 1.3]", ok_p, "fitted " + fmt(rep.galerkin.l2p));
}

TEST_CASE("[c03] two-level gap rate in the coarse mesh size") {
  RunConfig cfg = study_config();
  // memory-dominated, low-viscosity data: the two-level gap measures the
  // nonlinearity localization error, which needs the convection active to
  // sit in its H^2 asymptotic regime already at H = 1/4
  cfg.params = derive_params(0.4, 0.05, 1.0);
  cfg.study = "twolevel";
  cfg.fine_n = 64;
  cfg.coarse_levels = {4, 8, 16};
  const ConvergenceReport rep = run_convergence_study(cfg);
  REQUIRE(rep.twolevel.valid);
  const bool ok_h1 = rep.twolevel.gap_h1 >= 1.6 && rep.twolevel.gap_h1 <= 2.4;
  const double dp = rep.twolevel.gap_p - rep.twolevel.gap_h1;
  const bool ok_p = std::abs(dp) <= 0.4;
  report("C3 H1 velocity gap order in [1.6, 2.4]", ok_h1 && !rep.solver_failed,
         "fitted " + fmt(rep.twolevel.gap_h1));
  report("C3 pressure gap order within 0.4 of the velocity gap order", ok_p,
         "difference " + fmt(dp));
}

TEST_CASE("[c04] coupled scaling H ~ sqrt(h)") {
  RunConfig cfg = study_config();
  cfg.params = derive_params(0.4, 0.05, 1.0);
  cfg.study = "coupled";
  cfg.coupled_pairs = {{4, 16}, {8, 64}};
  const ConvergenceReport rep = run_convergence_study(cfg);
  REQUIRE(rep.coupled_valid);
  const bool ok = rep.coupled_h1_order >= 0.7 && rep.coupled_h1_order <= 1.3;
  report("C4 total H1 error order in h in [0.7, 1.3]", ok && !rep.solver_failed,
         "fitted " + fmt(rep.coupled_h1_order));
}

TEST_CASE("[c05] equal-mesh collapse of the two-level method") {
  Mesh mesh = build_unit_square(16);
  FESpace space(mesh, ElementKind::MINI);
  AssembledOperators ops = assemble_operators(space);
  const OldroydParams params = derive_params(1.0, 0.5, 1.0);
  const MMSCase mms = mms_case("default", params);

  TwoLevelSetup tl;
  tl.coarse_space = &space;
  tl.coarse_ops = &ops;
  tl.fine_space = &space;
  tl.fine_ops = &ops;
  tl.params = params;
  tl.scheme.dt = 0.01;
  tl.scheme.picard_tol = 1e-12;
  tl.solver.tolerance = 1e-12;
  tl.forcing = mms.forcing_fn();
  tl.u0 = mms.velocity_fn();
  tl.T = 0.05;
  const TwoLevelResult res = run_two_level(tl);
  const ErrorNorms gap = gap_norms(res.coarse_run.final_state, res.fine_state, ops);
  const double h1 = std::sqrt(res.fine_state.u.dot(ops.A * res.fine_state.u));
  const double rel = gap.velocity_h1 / std::max(h1, 1e-300);
  report("C5 H = h collapse, relative H1 gap <= 1e-8", rel <= 1e-8, "relative gap " + fmt(rel));
}

TEST_CASE("[c06] energy stability from rough data") {
  const OldroydParams params = derive_params(1.0, 0.5, 1.0);
  RunConfig cfg;
  cfg.params = params;
  cfg.initial = "rough";
  cfg.mms_id.clear();
  cfg.seed = 42;
  cfg.rough_amplitude = 0.25;

  Mesh fine_mesh = build_unit_square(16);
  FESpace fine_space(fine_mesh, ElementKind::MINI);
  AssembledOperators fine_ops = assemble_operators(fine_space);
  Mesh coarse_mesh = build_unit_square(8);
  FESpace coarse_space(coarse_mesh, ElementKind::MINI);
  AssembledOperators coarse_ops = assemble_operators(coarse_space);

  const Forcing rough = rough_initial_field(fine_mesh, cfg.seed, cfg.rough_amplitude);

  RunSetup galerkin;
  galerkin.space = &fine_space;
  galerkin.ops = &fine_ops;
  galerkin.params = params;
  galerkin.scheme.kind = SchemeKind::IMPLICIT_EULER;
  galerkin.scheme.dt = 0.01;
  galerkin.kernel_rule = KernelRule::RIGHT_RECT;
  galerkin.u0 = rough;
  galerkin.T = 5.0;  // 500 steps
  const SimulationResult ga = run_simulation(galerkin);
  bool ok_ga = true;
  double worst_ga = -1e300;
  for (const auto& d : ga.diagnostics) {
    if (d.energy > ga.diagnostics[0].energy + 1e-10) ok_ga = false;
    worst_ga = std::max(worst_ga, d.energy - ga.diagnostics[0].energy);
  }
  report("C6 nonlinear-method energy bound over 500 steps", ok_ga && ga.diagnostics.size() == 501,
         "max energy excess " + fmt(worst_ga));

  TwoLevelSetup tl;
  tl.coarse_space = &coarse_space;
  tl.coarse_ops = &coarse_ops;
  tl.fine_space = &fine_space;
  tl.fine_ops = &fine_ops;
  tl.params = params;
  tl.scheme = galerkin.scheme;
  tl.kernel_rule = KernelRule::RIGHT_RECT;
  tl.u0 = rough;
  tl.T = galerkin.T;
  const TwoLevelResult res = run_two_level(tl);
  bool ok_tl = true;
  double worst_tl = -1e300;
  for (const auto& d : res.fine_diagnostics) {
    if (d.energy > res.fine_diagnostics[0].energy + 1e-10) ok_tl = false;
    worst_tl = std::max(worst_tl, d.energy - res.fine_diagnostics[0].energy);
  }
  for (const auto& d : res.coarse_run.diagnostics)
    if (d.energy > res.coarse_run.diagnostics[0].energy + 1e-10) ok_tl = false;
  report("C6 two-level energy bound over 500 steps", ok_tl,
         "max fine energy excess " + fmt(worst_tl));
}

TEST_CASE("[c07] kernel positivity form is nonnegative") {
  std::mt19937 rng(777);
  std::normal_distribution<double> dist;
  std::uniform_int_distribution<int> len(1, 200);
  std::uniform_real_distribution<double> dts(1e-3, 0.5);
  const double alphas[3] = {0.1, 1.0, 10.0};
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const int L = len(rng);
    std::vector<double> seq(L);
    for (double& v : seq) v = dist(rng);
    worst = std::min(worst, kernel_quadratic_form(seq, alphas[rep % 3], dts(rng)));
  }
  report("C7 discrete kernel form >= -1e-12 over 1000 random sequences", worst >= -1e-12,
         "min value " + fmt(worst));
}

TEST_CASE("[c08] skew convection form annihilates its test slot") {
  std::mt19937 rng(888);
  std::normal_distribution<double> dist;
  double worst = 0.0;
  for (int n : {4, 8, 16}) {
    const Mesh m = build_unit_square(n);
    const FESpace space = build_space(m, ElementKind::MINI);
    for (int k = 0; k < 20; ++k) {
      Vector v(space.velocity_dofs()), w(space.velocity_dofs());
      for (int i = 0; i < v.size(); ++i) {
        v[i] = dist(rng);
        w[i] = dist(rng);
      }
      const Vector r = assemble_trilinear_vector(v, w, space);
      const double scale = std::max(r.norm() * w.norm(), 1e-300);
      worst = std::max(worst, std::abs(r.dot(w)) / scale);
    }
  }
  report("C8 |b(v,w,w)| <= 1e-12 * scale on random pairs", worst <= 1e-12,
         "worst relative value " + fmt(worst));
}

TEST_CASE("[c09] kernel recursion matches direct summation") {
  std::mt19937 rng(999);
  std::normal_distribution<double> dist;
  std::uniform_int_distribution<int> len(1, 100);
  std::uniform_real_distribution<double> dts(1e-3, 0.2);
  const OldroydParams p = params_from_coefficients(1.0, 1.4, 2.0);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int L = len(rng);
    const double dt = dts(rng);
    KernelState state = KernelState::zero(6);
    std::vector<Eigen::VectorXd> samples;
    for (int k = 0; k < L; ++k) {
      Eigen::VectorXd u(6);
      for (int i = 0; i < 6; ++i) u[i] = dist(rng);
      samples.push_back(u);
      kernel_update(state, u, dt, KernelRule::RIGHT_RECT, p);
    }
    Eigen::VectorXd direct = Eigen::VectorXd::Zero(6);
    for (size_t mIdx = 0; mIdx < samples.size(); ++mIdx)
      direct += dt * p.gamma *
                std::exp(-p.delta * dt * double(samples.size() - 1 - mIdx)) * samples[mIdx];
    worst = std::max(worst, (state.accumulator - direct).norm() / std::max(direct.norm(), 1e-300));
  }
  report("C9 recursion vs direct summation <= 1e-12 relative", worst <= 1e-12,
         "worst relative diff " + fmt(worst));
}

TEST_CASE("[c10] cost direction of the two-level method") {
  RunConfig cfg = study_config();
  cfg.T = 0.05;  // 100 steps: the per-step cost structure is what matters
  cfg.fine_n = 64;
  cfg.coarse_levels = {8};
  const CompareResult r = run_compare(cfg);
  report("C10 two-level / full fine-solve wall-clock ratio < 1", r.ratio < 1.0 && !r.solver_failed,
         "ratio " + fmt(r.ratio) + ", galerkin " + fmt(r.galerkin_ms) + " ms, two-level " +
             fmt(r.twolevel_ms) + " ms");
}

TEST_CASE("[c11] inf-sup boundedness and the unstable debug pair") {
  std::vector<double> mini;
  bool warnings = false;
  for (int n : {4, 8, 16}) {
    const Mesh m = build_unit_square(n);
    const FESpace space = build_space(m, ElementKind::MINI);
    const InfSupEstimate est = estimate_infsup(space);
    warnings |= est.warning;
    mini.push_back(est.value);
  }
  const double vmax = *std::max_element(mini.begin(), mini.end());
  const double vmin = *std::min_element(mini.begin(), mini.end());
  const bool ok_mini = !warnings && vmin > 0.0 && (vmax - vmin) / vmax < 0.25;
  report("C11 stable-pair inf-sup varies < 25% across levels", ok_mini,
         "values " + fmt(mini[0]) + ", " + fmt(mini[1]) + ", " + fmt(mini[2]));

  std::vector<double> p1p1;
  for (int n : {4, 8, 16}) {
    const Mesh m = build_unit_square(n);
    const FESpace space = build_space(m, ElementKind::P1_P1);
    p1p1.push_back(estimate_infsup(space).value);
  }
  const bool ok_p1p1 = p1p1[1] < p1p1[0] && p1p1[2] < p1p1[1];
  report("C11 equal-order pair decays under refinement", ok_p1p1,
         "values " + fmt(p1p1[0]) + ", " + fmt(p1p1[1]) + ", " + fmt(p1p1[2]));
}
