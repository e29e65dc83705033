#include "oldroyd/solver.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <stdexcept>

namespace oldroyd {

void validate(const SolverConfig& cfg) {
  if (!(cfg.tolerance > 0.0 && cfg.tolerance <= 1e-2))
    throw std::invalid_argument("solver.tolerance must be in (0, 1e-2]");
  if (cfg.max_iterations < 1)
    throw std::invalid_argument("solver.max_iterations must be >= 1");
}

DofRestriction DofRestriction::interior(const FESpace& space) {
  DofRestriction r;
  r.idx = space.interior_velocity_dofs();
  r.full_to_small.assign(space.velocity_dofs(), -1);
  for (size_t k = 0; k < r.idx.size(); ++k) r.full_to_small[r.idx[k]] = static_cast<int>(k);
  return r;
}

Vector DofRestriction::gather(const Vector& full) const {
  Vector small(idx.size());
  for (size_t k = 0; k < idx.size(); ++k) small[k] = full[idx[k]];
  return small;
}

Vector DofRestriction::scatter(const Vector& small, int full_size) const {
  Vector full = Vector::Zero(full_size);
  for (size_t k = 0; k < idx.size(); ++k) full[idx[k]] = small[k];
  return full;
}

SparseMatrix DofRestriction::restrict_square(const SparseMatrix& m) const {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(m.nonZeros());
  for (int row : idx) {
    const int r = full_to_small[row];
    for (SparseMatrix::InnerIterator it(m, row); it; ++it) {
      const int c = full_to_small[it.col()];
      if (c >= 0) trip.emplace_back(r, c, it.value());
    }
  }
  SparseMatrix out(size(), size());
  out.setFromTriplets(trip.begin(), trip.end());
  out.makeCompressed();
  return out;
}

SparseMatrix DofRestriction::restrict_cols(const SparseMatrix& b) const {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(b.nonZeros());
  for (int row = 0; row < b.rows(); ++row) {
    for (SparseMatrix::InnerIterator it(b, row); it; ++it) {
      const int c = full_to_small[it.col()];
      if (c >= 0) trip.emplace_back(row, c, it.value());
    }
  }
  SparseMatrix out(b.rows(), size());
  out.setFromTriplets(trip.begin(), trip.end());
  out.makeCompressed();
  return out;
}

namespace {

double max_abs_entry(const SparseMatrix& m) {
  double s = 0.0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) s = std::max(s, std::abs(it.value()));
  return s;
}

}  // namespace

SaddleSolver::SaddleSolver(SparseMatrix K0, SparseMatrix B, const SparseMatrix& Mp,
                           const SparseMatrix& Ap, double sigma, double theta,
                           SolverConfig cfg)
    : cfg_(cfg), K0_(std::move(K0)), B_(std::move(B)), sigma_(sigma), theta_(theta) {
  validate(cfg_);
  BT_ = SparseMatrix(B_.transpose());
  b_scale_ = std::max(max_abs_entry(B_), 1e-300);
  const int np = static_cast<int>(Mp.rows());
  mp_ones_ = Mp * Vector::Ones(np);
  mp_total_ = mp_ones_.sum();

  if (cfg_.method == SolveMethod::UZAWA_CG) {
    Eigen::SparseMatrix<double> K0c(K0_);
    ldlt_K0_.compute(K0c);
    if (ldlt_K0_.info() != Eigen::Success)
      throw std::runtime_error("SaddleSolver: factorization of the velocity block failed");
    Eigen::SparseMatrix<double> Mpc(Mp);
    ldlt_Mp_.compute(Mpc);
    // Bordered Neumann pressure Poisson for the Schur preconditioner.
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(Ap.nonZeros() + 2 * np);
    for (int k = 0; k < Ap.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(Ap, k); it; ++it)
        trip.emplace_back(int(it.row()), int(it.col()), it.value());
    for (int i = 0; i < np; ++i) {
      trip.emplace_back(i, np, mp_ones_[i]);
      trip.emplace_back(np, i, mp_ones_[i]);
    }
    Eigen::SparseMatrix<double> bordered(np + 1, np + 1);
    bordered.setFromTriplets(trip.begin(), trip.end());
    lu_Ap_bordered_.compute(bordered);
    if (lu_Ap_bordered_.info() != Eigen::Success)
      throw std::runtime_error("SaddleSolver: pressure Poisson factorization failed");
  }
}

void SaddleSolver::mean_zero(Vector& p) const {
  p.array() -= mp_ones_.dot(p) / mp_total_;
}

Vector SaddleSolver::solve_pressure_mass(const Vector& r) const { return ldlt_Mp_.solve(r); }

Vector SaddleSolver::solve_pressure_poisson(const Vector& r) const {
  Vector rhs(r.size() + 1);
  rhs.head(r.size()) = r;
  rhs[r.size()] = 0.0;
  Vector sol = lu_Ap_bordered_.solve(rhs);
  return sol.head(r.size());
}

Vector SaddleSolver::apply_schur_preconditioner(const Vector& r) const {
  Vector z = Vector::Zero(r.size());
  if (theta_ != 0.0) z += theta_ * solve_pressure_mass(r);
  if (sigma_ != 0.0) z += sigma_ * solve_pressure_poisson(r);
  if (theta_ == 0.0 && sigma_ == 0.0) z = solve_pressure_mass(r);
  z.array() -= z.mean();  // stay in the complement of the constants
  return z;
}

Vector SaddleSolver::solve_velocity_block(const Vector& b, int& inner_iters) const {
  if (!N_) {
    inner_iters += 1;
    return ldlt_K0_.solve(b);
  }
  // Preconditioned BiCGStab on (K0 + N) x = b with K0^-1 as preconditioner.
  const double bnorm = b.norm();
  Vector x = ldlt_K0_.solve(b);
  if (bnorm == 0.0) return Vector::Zero(b.size());
  const auto apply = [&](const Vector& v) -> Vector { return K0_ * v + (*N_) * v; };
  const double tol = std::min(1e-2 * cfg_.tolerance, 1e-12);
  Vector r = b - apply(x);
  if (r.norm() <= tol * bnorm) {
    inner_iters += 1;
    return x;
  }
  Vector rhat = r;
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  Vector v = Vector::Zero(b.size()), p = Vector::Zero(b.size());
  for (int it = 0; it < cfg_.max_iterations; ++it) {
    ++inner_iters;
    const double rho_new = rhat.dot(r);
    if (std::abs(rho_new) < 1e-300) break;
    const double beta = (rho_new / rho) * (alpha / omega);
    rho = rho_new;
    p = r + beta * (p - omega * v);
    const Vector phat = ldlt_K0_.solve(p);
    v = apply(phat);
    alpha = rho / rhat.dot(v);
    const Vector s = r - alpha * v;
    if (s.norm() <= tol * bnorm) {
      x += alpha * phat;
      return x;
    }
    const Vector shat = ldlt_K0_.solve(s);
    const Vector t = apply(shat);
    const double tt = t.dot(t);
    if (tt < 1e-300) break;
    omega = t.dot(s) / tt;
    x += alpha * phat + omega * shat;
    r = s - omega * t;
    if (r.norm() <= tol * bnorm) return x;
  }
  return x;  // caller verifies the final residuals
}

namespace {

// Dense bordered solve: [[K, -B^T, 0], [B, 0, w], [0, w^T, 0]].
std::pair<Vector, Vector> dense_bordered_solve(const SparseMatrix& K0, const SparseMatrix* N,
                                               const SparseMatrix& B, const Vector& mp_ones,
                                               const Vector& f, const Vector& g) {
  const int ni = static_cast<int>(K0.rows());
  const int np = static_cast<int>(B.rows());
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(ni + np + 1, ni + np + 1);
  D.topLeftCorner(ni, ni) = Eigen::MatrixXd(K0);
  if (N) D.topLeftCorner(ni, ni) += Eigen::MatrixXd(*N);
  const Eigen::MatrixXd Bd(B);
  D.block(ni, 0, np, ni) = Bd;
  D.block(0, ni, ni, np) = -Bd.transpose();
  D.block(ni, ni + np, np, 1) = mp_ones;
  D.block(ni + np, ni, 1, np) = mp_ones.transpose();
  Vector rhs = Vector::Zero(ni + np + 1);
  rhs.head(ni) = f;
  rhs.segment(ni, np) = g;
  const Vector sol = Eigen::PartialPivLU<Eigen::MatrixXd>(D).solve(rhs);
  return {sol.head(ni), sol.segment(ni, np)};
}

}  // namespace

std::pair<Vector, Vector> SaddleSolver::solve(const Vector& f, const Vector& g,
                                              SolveStats& stats,
                                              const Vector* pressure_warm_start) const {
  const int ni = static_cast<int>(K0_.rows());
  const int np = static_cast<int>(B_.rows());
  if (f.size() != ni || g.size() != np)
    throw std::invalid_argument("solve_saddle: rhs dimension mismatch");
  stats = SolveStats{};

  Vector u, p;
  if (f.lpNorm<Eigen::Infinity>() == 0.0 && g.lpNorm<Eigen::Infinity>() == 0.0) {
    stats.converged = true;
    return {Vector::Zero(ni), Vector::Zero(np)};
  }

  if (cfg_.method == SolveMethod::DIRECT_DENSE) {
    std::tie(u, p) = dense_bordered_solve(K0_, N_, B_, mp_ones_, f, g);
  } else {
    // Schur complement iteration: S p = g - B K^-1 f, S = B K^-1 B^T.
    const Vector Kinv_f = solve_velocity_block(f, stats.inner_iterations);
    const Vector g_s = g - B_ * Kinv_f;
    p = Vector::Zero(np);
    if (pressure_warm_start && pressure_warm_start->size() == np) p = *pressure_warm_start;
    mean_zero(p);
    const double gs_norm = g_s.norm();
    const double target = 0.2 * cfg_.tolerance * std::max(gs_norm, 1e-300);
    if (gs_norm > 0.0) {
      const auto apply_S = [&](const Vector& q) -> Vector {
        return B_ * solve_velocity_block(BT_ * q, stats.inner_iterations);
      };
      if (!N_) {
        // preconditioned CG
        Vector r = g_s - apply_S(p);
        Vector z = apply_schur_preconditioner(r);
        Vector d = z;
        double rz = r.dot(z);
        for (int it = 0; it < cfg_.max_iterations && r.norm() > target; ++it) {
          ++stats.outer_iterations;
          const Vector Sd = apply_S(d);
          const double dSd = d.dot(Sd);
          if (dSd <= 0.0) break;
          const double a = rz / dSd;
          p += a * d;
          r -= a * Sd;
          z = apply_schur_preconditioner(r);
          const double rz_new = r.dot(z);
          d = z + (rz_new / rz) * d;
          rz = rz_new;
        }
      } else {
        // preconditioned BiCGStab
        Vector r = g_s - apply_S(p);
        Vector rhat = r;
        double rho = 1.0, alpha = 1.0, omega = 1.0;
        Vector v = Vector::Zero(np), d = Vector::Zero(np);
        for (int it = 0; it < cfg_.max_iterations && r.norm() > target; ++it) {
          ++stats.outer_iterations;
          const double rho_new = rhat.dot(r);
          if (std::abs(rho_new) < 1e-300) break;
          const double beta = (rho_new / rho) * (alpha / omega);
          rho = rho_new;
          d = r + beta * (d - omega * v);
          const Vector dhat = apply_schur_preconditioner(d);
          v = apply_S(dhat);
          alpha = rho / rhat.dot(v);
          const Vector s = r - alpha * v;
          if (s.norm() <= target) {
            p += alpha * dhat;
            break;
          }
          const Vector shat = apply_schur_preconditioner(s);
          const Vector t = apply_S(shat);
          const double tt = t.dot(t);
          if (tt < 1e-300) break;
          omega = t.dot(s) / tt;
          p += alpha * dhat + omega * shat;
          r = s - omega * t;
        }
      }
    }
    mean_zero(p);
    u = solve_velocity_block(f + BT_ * p, stats.inner_iterations);
  }

  mean_zero(p);
  Vector r_mom = f + BT_ * p - K0_ * u;
  if (N_) r_mom -= (*N_) * u;
  const double mom_scale = std::max({f.norm(), (BT_ * p).norm(), 1e-300});
  stats.residual_momentum = r_mom.norm() / mom_scale;
  const double div_scale = std::max(b_scale_ * u.norm(), 1e-300);
  stats.residual_divergence = (B_ * u - g).norm() / div_scale;
  // relative residuals cannot be certified below the round-off floor of the
  // factored solves; the iteration targets still honor cfg_.tolerance
  const double rtol = std::max(cfg_.tolerance, 1e-11);
  stats.converged =
      stats.residual_momentum <= rtol && stats.residual_divergence <= rtol;
  return {u, p};
}

std::pair<Vector, Vector> solve_saddle(const SaddleSystem& sys, const SolverConfig& cfg,
                                       SolveStats& stats) {
  SaddleSolver solver(*sys.K0, *sys.B, *sys.Mp, *sys.Ap, sys.sigma, sys.theta, cfg);
  solver.set_skew(sys.N);
  return solver.solve(sys.rhs_u, sys.rhs_p, stats);
}

Vector l2_project_divfree(const std::function<Eigen::Vector2d(const Eigen::Vector2d&)>& field,
                          const FESpace& space, const AssembledOperators& ops,
                          const SolverConfig& cfg, SolveStats* stats) {
  const Vector load = assemble_load([&](const Eigen::Vector2d& x, double) { return field(x); },
                                    0.0, space);
  const DofRestriction rest = DofRestriction::interior(space);
  SaddleSolver solver(rest.restrict_square(ops.M), rest.restrict_cols(ops.B), ops.Mp, ops.Ap,
                      /*sigma=*/1.0, /*theta=*/0.0, cfg);
  SolveStats st;
  auto [u, p] = solver.solve(rest.gather(load), Vector::Zero(space.pressure_dofs()), st);
  if (stats) *stats = st;
  return rest.scatter(u, space.velocity_dofs());
}

Vector l2_project_divfree_discrete(const Vector& coeffs, const FESpace& space,
                                   const AssembledOperators& ops, const SolverConfig& cfg,
                                   SolveStats* stats) {
  const Vector load = ops.M * coeffs;
  const DofRestriction rest = DofRestriction::interior(space);
  SaddleSolver solver(rest.restrict_square(ops.M), rest.restrict_cols(ops.B), ops.Mp, ops.Ap,
                      1.0, 0.0, cfg);
  SolveStats st;
  auto [u, p] = solver.solve(rest.gather(load), Vector::Zero(space.pressure_dofs()), st);
  if (stats) *stats = st;
  return rest.scatter(u, space.velocity_dofs());
}

InfSupEstimate estimate_infsup(const FESpace& space) {
  InfSupEstimate est;
  const AssembledOperators ops = assemble_operators(space);
  const DofRestriction rest = DofRestriction::interior(space);
  if (rest.size() == 0 || space.pressure_dofs() <= 1) {
    est.warning = true;
    return est;
  }
  const SparseMatrix Ai = rest.restrict_square(ops.A);
  const SparseMatrix Bi = rest.restrict_cols(ops.B);
  const SparseMatrix BiT = SparseMatrix(Bi.transpose());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_A{Eigen::SparseMatrix<double>(Ai)};
  if (ldlt_A.info() != Eigen::Success) {
    est.warning = true;
    return est;
  }

  // At diagnostic sizes, form the Schur complement and solve the pencil
  // directly. The pressure quotient is taken by N_h = ker(S): unstable pairs
  // can carry spurious modes beyond the constants, and the inf-sup constant
  // is the smallest eigenvalue past the whole nullspace.
  if (space.pressure_dofs() <= 2000) {
    const int np = space.pressure_dofs();
    Eigen::MatrixXd S(np, np);
    Vector e = Vector::Zero(np);
    for (int j = 0; j < np; ++j) {
      e[j] = 1.0;
      S.col(j) = Bi * ldlt_A.solve(BiT * e);
      e[j] = 0.0;
    }
    S = 0.5 * (S + S.transpose().eval());
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::MatrixXd(ops.Mp));
    if (es.info() != Eigen::Success) {
      est.warning = true;
      return est;
    }
    const auto& eig = es.eigenvalues();
    const double lam_max = std::max(eig[np - 1], 0.0);
    const double threshold = std::max(1e-11, 1e-9 * lam_max);
    int null_dim = 0;
    while (null_dim < np && eig[null_dim] < threshold) ++null_dim;
    if (null_dim == 0 || null_dim >= np) {
      est.warning = true;  // no constant mode detected, or S vanished entirely
      est.value = null_dim >= np ? 0.0 : std::sqrt(std::max(eig[0], 0.0));
      return est;
    }
    est.value = std::sqrt(eig[null_dim]);
    return est;
  }
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_Mp{Eigen::SparseMatrix<double>(ops.Mp)};
  const int np = space.pressure_dofs();
  const Vector mp_ones = ops.Mp * Vector::Ones(np);
  const double mp_total = mp_ones.sum();
  const auto project = [&](Vector& q) { q.array() -= mp_ones.dot(q) / mp_total; };
  const auto apply_S = [&](const Vector& q) -> Vector { return Bi * ldlt_A.solve(BiT * q); };
  // preconditioner for the singular S: project the Mp-solve back onto the
  // euclidean complement of ker S = span{1}
  const auto precond = [&](const Vector& r) -> Vector {
    Vector z = ldlt_Mp.solve(r);
    z.array() -= z.mean();
    return z;
  };

  std::mt19937 rng(1234);
  std::normal_distribution<double> dist;
  Vector q(np);
  for (int i = 0; i < np; ++i) q[i] = dist(rng);
  project(q);
  q /= std::sqrt(q.dot(ops.Mp * q));

  double lambda = 0.0, lambda_prev = -1.0;
  const int max_outer = 200;
  int outer = 0;
  for (; outer < max_outer; ++outer) {
    // inverse iteration: solve S z = Mp q by CG with projected Mp preconditioning
    const Vector rhs = ops.Mp * q;  // perpendicular to ker S since q is Mp-mean-zero
    Vector z = Vector::Zero(np);
    Vector r = rhs;
    Vector pz = precond(r), d = pz;
    double rz = r.dot(pz);
    const double rhs_norm = rhs.norm();
    for (int it = 0; it < 2000 && r.norm() > 1e-12 * rhs_norm; ++it) {
      Vector Sd = apply_S(d);
      const double dSd = d.dot(Sd);
      if (dSd <= 1e-300) break;
      const double a = rz / dSd;
      z += a * d;
      r -= a * Sd;
      Vector znew = precond(r);
      const double rz_new = r.dot(znew);
      d = znew + (rz_new / rz) * d;
      rz = rz_new;
    }
    project(z);
    const double znorm = std::sqrt(z.dot(ops.Mp * z));
    if (!(znorm > 1e-300) || !std::isfinite(znorm)) {
      est.warning = true;
      break;
    }
    q = z / znorm;
    lambda = q.dot(apply_S(q)) / q.dot(ops.Mp * q);
    if (lambda_prev > 0 && std::abs(lambda - lambda_prev) <= 1e-9 * lambda) break;
    lambda_prev = lambda;
  }
  est.iterations = outer;
  if (!(lambda > 0) || !std::isfinite(lambda)) {
    est.warning = true;
    est.value = 0.0;
  } else {
    est.value = std::sqrt(lambda);
    if (outer >= max_outer) est.warning = true;
  }
  return est;
}

}  // namespace oldroyd
