#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "oldroyd/cli.hpp"

namespace py = pybind11;
using namespace oldroyd;

namespace {

ElementKind element_from_string(const std::string& s) {
  if (s == "mini") return ElementKind::MINI;
  if (s == "taylor_hood") return ElementKind::TAYLOR_HOOD;
  if (s == "p1p1") return ElementKind::P1_P1;
  throw std::invalid_argument("element must be mini|taylor_hood|p1p1");
}

RunConfig config_from_kwargs(double nu, double kappa, double lambda, int n,
                             const std::string& element, const std::string& scheme, double dt,
                             double T, const std::string& kernel_rule, double solver_tol) {
  RunConfig cfg;
  cfg.params = derive_params(nu, kappa, lambda);
  cfg.element = element_from_string(element);
  cfg.levels = {n};
  cfg.scheme.kind = scheme == "bdf2" ? SchemeKind::BDF2 : SchemeKind::IMPLICIT_EULER;
  cfg.scheme.dt = dt;
  cfg.T = T;
  cfg.kernel_rule =
      kernel_rule == "pw_linear" ? KernelRule::PW_LINEAR_EXACT : KernelRule::RIGHT_RECT;
  cfg.solver.tolerance = solver_tol;
  return cfg;
}

py::dict norms_dict(const ErrorNorms& e) {
  py::dict d;
  d["velocity_l2"] = e.velocity_l2;
  d["velocity_h1"] = e.velocity_h1;
  d["pressure_l2"] = e.pressure_l2;
  return d;
}

}  // namespace

PYBIND11_MODULE(_oldroyd, m) {
  m.doc() = "Two-level mixed finite element solver for the order-one viscoelastic flow model";

  m.def(
      "derive_params",
      [](double nu, double kappa, double lambda) {
        const OldroydParams p = derive_params(nu, kappa, lambda);
        py::dict d;
        d["nu"] = p.nu;
        d["kappa"] = p.kappa;
        d["lambda"] = p.lambda;
        d["mu"] = p.mu;
        d["gamma"] = p.gamma;
        d["delta"] = p.delta;
        return d;
      },
      py::arg("nu"), py::arg("kappa"), py::arg("lambda"),
      "Derived kernel coefficients mu, gamma, delta of the memory kernel");

  m.def(
      "kernel_quadratic_form",
      [](const std::vector<double>& phi, double alpha, double dt) {
        return kernel_quadratic_form(phi, alpha, dt);
      },
      py::arg("phi"), py::arg("alpha"), py::arg("dt"));

  m.def(
      "mesh_counts",
      [](int n) {
        const Mesh mesh = build_unit_square(n);
        py::dict d;
        d["vertices"] = mesh.num_vertices();
        d["triangles"] = mesh.num_triangles();
        return d;
      },
      py::arg("n"));

  m.def(
      "space_info",
      [](int n, const std::string& element) {
        const Mesh mesh = build_unit_square(n);
        const FESpace space(mesh, element_from_string(element));
        py::dict d;
        d["velocity_dofs"] = space.velocity_dofs();
        d["pressure_dofs"] = space.pressure_dofs();
        d["interior_velocity_dofs"] = int(space.interior_velocity_dofs().size());
        return d;
      },
      py::arg("n"), py::arg("element") = "mini");

  m.def(
      "estimate_infsup",
      [](int n, const std::string& element) {
        const Mesh mesh = build_unit_square(n);
        const FESpace space(mesh, element_from_string(element));
        const InfSupEstimate est = estimate_infsup(space);
        py::dict d;
        d["value"] = est.value;
        d["warning"] = est.warning;
        return d;
      },
      py::arg("n"), py::arg("element") = "mini");

  m.def(
      "run_galerkin",
      [](double nu, double kappa, double lambda, int n, const std::string& element,
         const std::string& scheme, double dt, double T, const std::string& kernel_rule,
         double solver_tol) {
        RunConfig cfg = config_from_kwargs(nu, kappa, lambda, n, element, scheme, dt, T,
                                           kernel_rule, solver_tol);
        Discretization d = Discretization::create(n, cfg.element);
        const MMSCase mms = mms_case("default", cfg.params);
        RunSetup setup;
        setup.space = d.space.get();
        setup.ops = &d.ops;
        setup.params = cfg.params;
        setup.scheme = cfg.scheme;
        setup.kernel_rule = cfg.kernel_rule;
        setup.solver = cfg.solver;
        setup.forcing = mms.forcing_fn();
        setup.u0 = mms.velocity_fn();
        setup.T = cfg.T;
        const SimulationResult res = run_simulation(setup);
        py::dict out = norms_dict(error_norms(res.final_state, mms, *d.space, res.final_state.t));
        out["picard_total"] = res.picard_total;
        out["final_energy"] = res.diagnostics.back().energy;
        out["solver_failed"] = res.solver_failed;
        out["wall_ms"] = res.wall_ms;
        return out;
      },
      py::arg("nu") = 1.0, py::arg("kappa") = 0.5, py::arg("lambda") = 1.0, py::arg("n") = 8,
      py::arg("element") = "mini", py::arg("scheme") = "implicit_euler", py::arg("dt") = 1e-2,
      py::arg("T") = 0.1, py::arg("kernel_rule") = "right_rect", py::arg("solver_tol") = 1e-10,
      "Nonlinear evolution against the built-in manufactured solution; returns error norms");

  m.def(
      "run_two_level",
      [](double nu, double kappa, double lambda, int coarse_n, int fine_n,
         const std::string& element, const std::string& scheme, double dt, double T,
         const std::string& kernel_rule, double solver_tol, double picard_tol) {
        RunConfig cfg = config_from_kwargs(nu, kappa, lambda, fine_n, element, scheme, dt, T,
                                           kernel_rule, solver_tol);
        cfg.scheme.picard_tol = picard_tol;
        Discretization coarse = Discretization::create(coarse_n, cfg.element);
        Discretization fine = Discretization::create(fine_n, cfg.element);
        const MMSCase mms = mms_case("default", cfg.params);
        TwoLevelSetup tl;
        tl.coarse_space = coarse.space.get();
        tl.coarse_ops = &coarse.ops;
        tl.fine_space = fine.space.get();
        tl.fine_ops = &fine.ops;
        tl.params = cfg.params;
        tl.scheme = cfg.scheme;
        tl.kernel_rule = cfg.kernel_rule;
        tl.solver = cfg.solver;
        tl.forcing = mms.forcing_fn();
        tl.u0 = mms.velocity_fn();
        tl.T = cfg.T;
        const TwoLevelResult res = run_two_level(tl);

        RunSetup ref;
        ref.space = fine.space.get();
        ref.ops = &fine.ops;
        ref.params = cfg.params;
        ref.scheme = cfg.scheme;
        ref.kernel_rule = cfg.kernel_rule;
        ref.solver = cfg.solver;
        ref.forcing = mms.forcing_fn();
        ref.u0 = mms.velocity_fn();
        ref.T = cfg.T;
        const SimulationResult full = run_simulation(ref);

        const ErrorNorms gap = gap_norms(full.final_state, res.fine_state, fine.ops);
        py::dict out;
        out["gap_l2"] = gap.velocity_l2;
        out["gap_h1"] = gap.velocity_h1;
        out["gap_p"] = gap.pressure_l2;
        out["err"] = norms_dict(error_norms(res.fine_state, mms, *fine.space, res.fine_state.t));
        out["coarse_ms"] = res.coarse_ms;
        out["transfer_ms"] = res.transfer_ms;
        out["fine_ms"] = res.fine_ms;
        out["galerkin_ms"] = full.wall_ms;
        return out;
      },
      py::arg("nu") = 1.0, py::arg("kappa") = 0.5, py::arg("lambda") = 1.0,
      py::arg("coarse_n") = 4, py::arg("fine_n") = 8, py::arg("element") = "mini",
      py::arg("scheme") = "implicit_euler", py::arg("dt") = 1e-2, py::arg("T") = 0.1,
      py::arg("kernel_rule") = "right_rect", py::arg("solver_tol") = 1e-10,
      py::arg("picard_tol") = 1e-10,
      "Two-level run plus the reference fine nonlinear run; returns gap and error norms");

  m.def(
      "observed_order",
      [](const std::vector<double>& errors, const std::vector<double>& hs) {
        const FittedOrders fit = observed_order(errors, hs);
        py::dict d;
        d["successive"] = fit.successive;
        d["slope"] = fit.slope;
        return d;
      },
      py::arg("errors"), py::arg("hs"));

  m.attr("__version__") = "0.1.0";
}
