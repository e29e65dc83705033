#include "oldroyd/twolevel.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace oldroyd {

CoarseFieldEval::CoarseFieldEval(const FESpace& coarse, const FESpace& fine, int quad_degree)
    : coarse_(&coarse), degree_(quad_degree) {
  const Mesh& fm = fine.mesh();
  const Mesh& cm = coarse.mesh();
  int r = fm.n / cm.n;
  if (cm.n * r != fm.n || (r & (r - 1)) != 0)
    throw std::invalid_argument("CoarseFieldEval: meshes are not nested (need n_f = n_c * 2^k)");

  const auto& rule = fine.basis_table(quad_degree).rule;
  nq_ = rule.size();
  nlc_ = coarse.local_scalar_size();
  const int nt = fm.num_triangles();
  ancestor_.resize(nt);
  coarse_dofs_.resize(size_t(nt) * nlc_);
  basis_values_.resize(size_t(nt) * nq_ * nlc_);
  basis_gradients_.resize(size_t(nt) * nq_ * nlc_ * 2);

  Eigen::VectorXd vals;
  Eigen::MatrixX2d grads;
  for (int t = 0; t < nt; ++t) {
    const int anc = coarse_ancestor(fm, t, cm);
    ancestor_[t] = anc;
    const int* cd = coarse.element_dofs(anc);
    for (int i = 0; i < nlc_; ++i) coarse_dofs_[size_t(t) * nlc_ + i] = cd[i];
    for (int q = 0; q < nq_; ++q) {
      const Eigen::Vector2d x = fine.physical_point(t, rule.points[q]);
      const Location loc = locate_in_coarse(x, cm, anc);
      coarse.eval_basis(anc, loc.bary, vals, grads);
      for (int i = 0; i < nlc_; ++i) {
        basis_values_[(size_t(t) * nq_ + q) * nlc_ + i] = vals[i];
        basis_gradients_[((size_t(t) * nq_ + q) * nlc_ + i) * 2 + 0] = grads(i, 0);
        basis_gradients_[((size_t(t) * nq_ + q) * nlc_ + i) * 2 + 1] = grads(i, 1);
      }
    }
  }
}

Eigen::Vector2d CoarseFieldEval::value(const Vector& u_coarse, int t, int q) const {
  const int ns = coarse_->scalar_dofs();
  const int* cd = &coarse_dofs_[size_t(t) * nlc_];
  const double* bv = &basis_values_[(size_t(t) * nq_ + q) * nlc_];
  Eigen::Vector2d v = Eigen::Vector2d::Zero();
  for (int i = 0; i < nlc_; ++i) {
    v.x() += bv[i] * u_coarse[cd[i]];
    v.y() += bv[i] * u_coarse[ns + cd[i]];
  }
  return v;
}

Eigen::Matrix2d CoarseFieldEval::gradient(const Vector& u_coarse, int t, int q) const {
  const int ns = coarse_->scalar_dofs();
  const int* cd = &coarse_dofs_[size_t(t) * nlc_];
  const double* bg = &basis_gradients_[(size_t(t) * nq_ + q) * nlc_ * 2];
  Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
  for (int i = 0; i < nlc_; ++i) {
    const double cx = u_coarse[cd[i]], cy = u_coarse[ns + cd[i]];
    g(0, 0) += bg[2 * i] * cx;
    g(0, 1) += bg[2 * i + 1] * cx;
    g(1, 0) += bg[2 * i] * cy;
    g(1, 1) += bg[2 * i + 1] * cy;
  }
  return g;
}

Vector CoarseFieldEval::assemble_frozen_convection(const Vector& u_coarse,
                                                   const FESpace& fine) const {
  const int ns = fine.scalar_dofs();
  const int nsc = coarse_->scalar_dofs();
  if (u_coarse.size() != 2 * nsc)
    throw std::invalid_argument("assemble_frozen_convection: coarse coefficient size mismatch");
  const Mesh& fm = fine.mesh();
  const auto& table = fine.basis_table(degree_);
  const int nl = fine.local_scalar_size();
  Vector r = Vector::Zero(2 * ns);
  Eigen::VectorXd r_loc_x(nl), r_loc_y(nl);

  for (int t = 0; t < fm.num_triangles(); ++t) {
    const int cls = FESpace::geometry_class(t);
    const int* dofs = fine.element_dofs(t);
    const int* cd = &coarse_dofs_[size_t(t) * nlc_];
    r_loc_x.setZero();
    r_loc_y.setZero();
    for (int q = 0; q < nq_; ++q) {
      const double qw = table.rule.weights[q] * table.jacobian;
      const double* bv = &basis_values_[(size_t(t) * nq_ + q) * nlc_];
      const double* bg = &basis_gradients_[(size_t(t) * nq_ + q) * nlc_ * 2];
      double ux = 0, uy = 0, gxx = 0, gxy = 0, gyx = 0, gyy = 0;
      for (int i = 0; i < nlc_; ++i) {
        const double cx = u_coarse[cd[i]], cy = u_coarse[nsc + cd[i]];
        ux += bv[i] * cx;
        uy += bv[i] * cy;
        gxx += bg[2 * i] * cx;
        gxy += bg[2 * i + 1] * cx;
        gyx += bg[2 * i] * cy;
        gyy += bg[2 * i + 1] * cy;
      }
      const double conv_x = ux * gxx + uy * gxy;  // (u_H . grad) u_H
      const double conv_y = ux * gyx + uy * gyy;
      const auto& phi = table.values[cls][q];
      const auto& dphi = table.gradients[cls][q];
      for (int i = 0; i < nl; ++i) {
        const double udphi = ux * dphi(i, 0) + uy * dphi(i, 1);
        r_loc_x[i] += 0.5 * qw * (conv_x * phi[i] - ux * udphi);
        r_loc_y[i] += 0.5 * qw * (conv_y * phi[i] - uy * udphi);
      }
    }
    for (int i = 0; i < nl; ++i) {
      r[dofs[i]] += r_loc_x[i];
      r[ns + dofs[i]] += r_loc_y[i];
    }
  }
  return r;
}

SimulationResult run_first_level(const RunSetup& setup) { return run_simulation(setup); }

namespace {

class TrajectoryStore {
 public:
  TrajectoryStore(const std::string& spill_path, int nsteps, int dofs)
      : spill_path_(spill_path), dofs_(dofs) {
    if (spill_path_.empty()) {
      memory_.resize(nsteps + 1);
    } else {
      out_.open(spill_path_, std::ios::binary | std::ios::trunc);
      if (!out_) throw std::runtime_error("two-level spill: cannot open " + spill_path_);
    }
  }
  void put(int step, const Vector& u) {
    if (spill_path_.empty()) {
      memory_[step] = u;
    } else {
      out_.seekp(std::streamoff(step) * dofs_ * sizeof(double));
      out_.write(reinterpret_cast<const char*>(u.data()), dofs_ * sizeof(double));
    }
  }
  void finish_writing() {
    if (!spill_path_.empty()) {
      out_.close();
      in_.open(spill_path_, std::ios::binary);
      if (!in_) throw std::runtime_error("two-level spill: cannot reopen " + spill_path_);
    }
  }
  Vector get(int step) {
    if (spill_path_.empty()) return memory_[step];
    Vector u(dofs_);
    in_.seekg(std::streamoff(step) * dofs_ * sizeof(double));
    in_.read(reinterpret_cast<char*>(u.data()), dofs_ * sizeof(double));
    return u;
  }
  void cleanup() {
    if (!spill_path_.empty()) {
      in_.close();
      std::remove(spill_path_.c_str());
    }
  }

 private:
  std::string spill_path_;
  int dofs_;
  std::vector<Vector> memory_;
  std::ofstream out_;
  std::ifstream in_;
};

}  // namespace

TwoLevelResult run_two_level(const TwoLevelSetup& setup) {
  if (!setup.coarse_space || !setup.fine_space || !setup.coarse_ops || !setup.fine_ops)
    throw std::invalid_argument("run_two_level: missing spaces/operators");
  const Mesh& cm = setup.coarse_space->mesh();
  const Mesh& fm = setup.fine_space->mesh();
  int r = fm.n / cm.n;
  if (cm.n * r != fm.n || (r & (r - 1)) != 0)
    throw std::invalid_argument("run_two_level: coarse mesh is not an ancestor of the fine mesh");
  validate(setup.scheme);
  const long nsteps = std::lround(setup.T / setup.scheme.dt);
  if (std::abs(nsteps * setup.scheme.dt - setup.T) > 1e-9 * std::max(1.0, setup.T))
    throw std::invalid_argument("run_two_level: T must be an integer multiple of dt");

  using clock = std::chrono::steady_clock;
  TwoLevelResult result;

  // First level: nonlinear coarse evolution, trajectory retained per step.
  TrajectoryStore traj(setup.spill_path, static_cast<int>(nsteps),
                       setup.coarse_space->velocity_dofs());
  RunSetup coarse;
  coarse.space = setup.coarse_space;
  coarse.ops = setup.coarse_ops;
  coarse.params = setup.params;
  coarse.scheme = setup.scheme;
  coarse.kernel_rule = setup.kernel_rule;
  coarse.solver = setup.solver;
  coarse.forcing = setup.forcing;
  coarse.u0 = setup.u0;
  coarse.u0_discrete = setup.u0_discrete;
  coarse.T = setup.T;
  coarse.recorder = [&](int step, const State& s) { traj.put(step, s.u); };
  auto tic = clock::now();
  result.coarse_run = run_first_level(coarse);
  result.coarse_ms = std::chrono::duration<double, std::milli>(clock::now() - tic).count();
  traj.finish_writing();

  // Transfer: cross-mesh evaluation cache at the fine assembly points.
  tic = clock::now();
  CoarseFieldEval eval(*setup.coarse_space, *setup.fine_space,
                       setup.fine_space->assembly_degree());
  result.transfer_ms = std::chrono::duration<double, std::milli>(clock::now() - tic).count();

  // Second level: linearized fine evolution, convection frozen at the
  // time-aligned coarse velocity; memory from the fine history itself.
  tic = clock::now();
  LinearizedStepper stepper(*setup.fine_space, *setup.fine_ops, setup.params, setup.scheme,
                            setup.kernel_rule, setup.solver, setup.forcing);
  State s;
  if (setup.fine_initial == TwoLevelSetup::FineInitial::PROLONG) {
    const Vector u_H0 = traj.get(0);
    // prolongation: interpolate the coarse initial field on the fine space
    const Mesh& cmesh = setup.coarse_space->mesh();
    const FESpace& cs = *setup.coarse_space;
    auto coarse_field = [&](const Eigen::Vector2d& x) {
      const Location loc = locate_in_coarse(x, cmesh);
      Eigen::VectorXd vals;
      Eigen::MatrixX2d grads;
      cs.eval_basis(loc.triangle, loc.bary, vals, grads);
      const int* cd = cs.element_dofs(loc.triangle);
      Eigen::Vector2d v = Eigen::Vector2d::Zero();
      for (int i = 0; i < cs.local_scalar_size(); ++i) {
        v.x() += vals[i] * u_H0[cd[i]];
        v.y() += vals[i] * u_H0[cs.scalar_dofs() + cd[i]];
      }
      return v;
    };
    s = stepper.initial_state_discrete(setup.fine_space->interpolate(coarse_field));
  } else if (setup.u0_discrete) {
    s = stepper.initial_state_discrete(*setup.u0_discrete);
  } else {
    s = stepper.initial_state(setup.u0);
  }

  const auto fine_diag = [&](const State& st) {
    StepDiagnostics d;
    d.t = st.t;
    d.energy = std::sqrt(std::max(0.0, st.u.dot(setup.fine_ops->M * st.u)));
    d.picard_iterations = 0;
    d.kernel_norm = std::sqrt(
        std::max(0.0, st.kernel.accumulator.dot(setup.fine_ops->M * st.kernel.accumulator)));
    return d;
  };
  const SparseMatrix Bi = stepper.restriction().restrict_cols(setup.fine_ops->B);
  StepDiagnostics d0 = fine_diag(s);
  d0.div_residual = (Bi * stepper.restriction().gather(s.u)).norm();
  result.fine_diagnostics.push_back(d0);

  for (long n = 0; n < nsteps; ++n) {
    const Vector u_H = traj.get(static_cast<int>(n + 1));
    const Vector conv = eval.assemble_frozen_convection(u_H, *setup.fine_space);
    stepper.step_linearized(s, conv);
    StepDiagnostics d = fine_diag(s);
    d.div_residual = (Bi * stepper.restriction().gather(s.u)).norm();
    result.fine_diagnostics.push_back(d);
  }
  result.fine_ms = std::chrono::duration<double, std::milli>(clock::now() - tic).count();
  result.solver_failed = result.coarse_run.solver_failed || stepper.solver_failed();
  result.fine_state = std::move(s);
  traj.cleanup();
  return result;
}

}  // namespace oldroyd
