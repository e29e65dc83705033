#include <doctest.h>

#include <cmath>
#include <random>

#include "oldroyd/solver.hpp"

using namespace oldroyd;

namespace {

struct Setup {
  Mesh mesh;
  FESpace space;
  AssembledOperators ops;
  DofRestriction rest;
  Setup(int n, ElementKind kind)
      : mesh(build_unit_square(n)), space(mesh, kind), ops(assemble_operators(space)),
        rest(DofRestriction::interior(space)) {}
};

Vector random_vector(int n, std::mt19937& rng) {
  std::normal_distribution<double> dist;
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

}  // namespace

TEST_SUITE_BEGIN("solver");

TEST_CASE("config validation") {
  SolverConfig bad;
  bad.tolerance = 0.5;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad.tolerance = 1e-10;
  bad.max_iterations = 0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("zero rhs gives the zero solution") {
  Setup s(4, ElementKind::MINI);
  SaddleSolver solver(s.rest.restrict_square(s.ops.M) , s.rest.restrict_cols(s.ops.B), s.ops.Mp,
                      s.ops.Ap, 1.0, 0.0, SolverConfig{});
  SolveStats stats;
  auto [u, p] = solver.solve(Vector::Zero(s.rest.size()), Vector::Zero(s.space.pressure_dofs()),
                             stats);
  CHECK(u.norm() == 0.0);
  CHECK(p.norm() == 0.0);
  CHECK(stats.converged);
}

TEST_CASE("manufactured stokes-type system is recovered") {
  Setup s(8, ElementKind::MINI);
  const SparseMatrix Ki = SparseMatrix(s.rest.restrict_square(s.ops.M) + s.rest.restrict_square(s.ops.A));
  const SparseMatrix Bi = s.rest.restrict_cols(s.ops.B);
  SolverConfig cfg;
  cfg.tolerance = 1e-12;
  SaddleSolver solver(Ki, Bi, s.ops.Mp, s.ops.Ap, 1.0, 1.0, cfg);

  // build a consistent rhs from a known (u*, p*) with B u* = g
  std::mt19937 rng(7);
  Vector u_star = random_vector(s.rest.size(), rng);
  Vector p_star = random_vector(s.space.pressure_dofs(), rng);
  // make p* mean-zero in the Mp sense so it is reachable
  const Vector mp1 = s.ops.Mp * Vector::Ones(p_star.size());
  p_star.array() -= mp1.dot(p_star) / mp1.sum();
  const Vector f = Ki * u_star - SparseMatrix(Bi.transpose()) * p_star;
  const Vector g = Bi * u_star;
  SolveStats stats;
  auto [u, p] = solver.solve(f, g, stats);
  CHECK(stats.converged);
  CHECK((u - u_star).norm() <= 1e-8 * u_star.norm());
  CHECK((p - p_star).norm() <= 1e-7 * std::max(1.0, p_star.norm()));
}

TEST_CASE("direct dense and uzawa agree on a stokes solve") {
  Setup s(8, ElementKind::MINI);
  const SparseMatrix Ki = s.rest.restrict_square(s.ops.A);
  const SparseMatrix Bi = s.rest.restrict_cols(s.ops.B);
  const Vector load = assemble_load(
      [](const Eigen::Vector2d& x, double) {
        return Eigen::Vector2d(std::sin(M_PI * x.x()) * x.y(), x.x() - 0.5);
      },
      0.0, s.space);
  const Vector f = s.rest.gather(load);
  const Vector g = Vector::Zero(s.space.pressure_dofs());

  SolverConfig uz;
  uz.tolerance = 1e-12;
  uz.max_iterations = 2000;
  SaddleSolver uzawa(Ki, Bi, s.ops.Mp, s.ops.Ap, 0.0, 1.0, uz);
  SolveStats st1, st2;
  auto [u1, p1] = uzawa.solve(f, g, st1);
  CHECK(st1.converged);

  SolverConfig dd;
  dd.method = SolveMethod::DIRECT_DENSE;
  SaddleSolver direct(Ki, Bi, s.ops.Mp, s.ops.Ap, 0.0, 1.0, dd);
  auto [u2, p2] = direct.solve(f, g, st2);
  CHECK(st2.converged);

  CHECK((u1 - u2).norm() <= 1e-8 * std::max(1.0, u2.norm()));
  CHECK((p1 - p2).norm() <= 1e-8 * std::max(1.0, p2.norm()));
}

TEST_CASE("residual contract holds on random well-posed systems") {
  Setup s(4, ElementKind::MINI);
  std::mt19937 rng(99);
  const SparseMatrix Mi = s.rest.restrict_square(s.ops.M);
  const SparseMatrix Ai = s.rest.restrict_square(s.ops.A);
  const SparseMatrix Bi = s.rest.restrict_cols(s.ops.B);
  SolverConfig cfg;
  cfg.tolerance = 1e-10;
  for (int k = 0; k < 20; ++k) {
    // SPD-plus-skew velocity block: sigma M + A + N(w)
    const double sigma = 1.0 + 10.0 * std::abs(std::normal_distribution<double>()(rng));
    const Vector w = random_vector(s.space.velocity_dofs(), rng);
    const SparseMatrix Ni = s.rest.restrict_square(assemble_oseen_matrix(w, s.space));
    const SparseMatrix K0 = SparseMatrix(sigma * Mi + Ai);
    SaddleSolver solver(K0, Bi, s.ops.Mp, s.ops.Ap, sigma, 1.0, cfg);
    solver.set_skew(&Ni);
    const Vector f = random_vector(s.rest.size(), rng);
    SolveStats stats;
    auto [u, p] = solver.solve(f, Vector::Zero(s.space.pressure_dofs()), stats);
    CHECK(stats.converged);
    CHECK(stats.residual_momentum <= cfg.tolerance);
    CHECK(stats.residual_divergence <= cfg.tolerance);
    // mean-zero pressure
    const Vector mp1 = s.ops.Mp * Vector::Ones(p.size());
    CHECK(std::abs(mp1.dot(p)) <= 1e-10 * std::max(1.0, p.norm()));
  }
}

TEST_CASE("projection onto the divergence-free subspace") {
  Setup s(8, ElementKind::MINI);
  SolverConfig cfg;
  cfg.tolerance = 1e-12;

  // projecting a projected field changes nothing (idempotence)
  const auto field = [](const Eigen::Vector2d& x) {
    return Eigen::Vector2d(std::sin(M_PI * x.x()) * std::sin(M_PI * x.y()),
                           x.x() * (1 - x.x()) * x.y() * (1 - x.y()));
  };
  const Vector u1 = l2_project_divfree(field, s.space, s.ops, cfg);
  const Vector u2 = l2_project_divfree_discrete(u1, s.space, s.ops, cfg);
  CHECK((u2 - u1).norm() <= 1e-10 * std::max(1.0, u1.norm()));

  // discrete divergence vanishes
  const SparseMatrix Bi = s.rest.restrict_cols(s.ops.B);
  CHECK((Bi * s.rest.gather(u1)).norm() <= 1e-9 * std::max(1.0, u1.norm()));

  // projection is a contraction: ||P u||_M <= ||u||_(L2) + quadrature slack
  std::mt19937 rng(13);
  const Vector raw = random_vector(s.space.velocity_dofs(), rng);
  const Vector proj = l2_project_divfree_discrete(raw, s.space, s.ops, cfg);
  const double norm_raw = std::sqrt(raw.dot(s.ops.M * raw));
  const double norm_proj = std::sqrt(proj.dot(s.ops.M * proj));
  CHECK(norm_proj <= norm_raw * (1 + 1e-12));

  // defining orthogonality: (P f - f, v)_{L2} = 0 for discretely
  // divergence-free v (built by projecting random fields)
  const Vector load = assemble_load([&](const Eigen::Vector2d& x, double) { return field(x); },
                                    0.0, s.space);
  for (int k = 0; k < 5; ++k) {
    const Vector v = l2_project_divfree_discrete(random_vector(s.space.velocity_dofs(), rng),
                                                 s.space, s.ops, cfg);
    const double lhs = v.dot(s.ops.M * u1) - v.dot(load);
    CHECK(std::abs(lhs) <= 1e-9 * std::max(1.0, v.norm() * u1.norm()));
  }
}

TEST_CASE("inf-sup estimate: stable pairs level off, p1/p1 decays") {
  std::vector<double> mini_values;
  for (int n : {4, 8, 16}) {
    const Mesh m = build_unit_square(n);
    const FESpace space = build_space(m, ElementKind::MINI);
    const InfSupEstimate est = estimate_infsup(space);
    CHECK_FALSE(est.warning);
    CHECK(est.value > 0.0);
    mini_values.push_back(est.value);
  }
  const double vmax = *std::max_element(mini_values.begin(), mini_values.end());
  const double vmin = *std::min_element(mini_values.begin(), mini_values.end());
  CHECK((vmax - vmin) / vmax < 0.25);

  std::vector<double> p1p1_values;
  for (int n : {4, 8, 16}) {
    const Mesh m = build_unit_square(n);
    const FESpace space = build_space(m, ElementKind::P1_P1);
    p1p1_values.push_back(estimate_infsup(space).value);
  }
  CHECK(p1p1_values[1] < p1p1_values[0]);
  CHECK(p1p1_values[2] < p1p1_values[1]);

  // degenerate single-cell space: warning or error, never a silent value
  const Mesh m1 = build_unit_square(1);
  const FESpace tiny = build_space(m1, ElementKind::MINI);
  const InfSupEstimate est = estimate_infsup(tiny);
  CHECK((est.warning || est.value >= 0.0));
}

TEST_SUITE_END();
