#include "oldroyd/verify.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace oldroyd {

namespace {

// x^2 (1-x)^2 and derivatives
inline double qa(double x) { return x * x * (1.0 - x) * (1.0 - x); }
inline double qa1(double x) { return 4.0 * x * x * x - 6.0 * x * x + 2.0 * x; }
inline double qa2(double x) { return 12.0 * x * x - 12.0 * x + 2.0; }
inline double qa3(double x) { return 24.0 * x - 12.0; }

inline double temporal(double t) { return std::exp(-t); }

}  // namespace

Eigen::Vector2d MMSCase::velocity(const Eigen::Vector2d& x, double t) const {
  const double g = temporal(t);
  return {qa(x.x()) * qa1(x.y()) * g, -qa1(x.x()) * qa(x.y()) * g};
}

Eigen::Matrix2d MMSCase::velocity_gradient(const Eigen::Vector2d& x, double t) const {
  const double g = temporal(t);
  Eigen::Matrix2d grad;
  grad(0, 0) = qa1(x.x()) * qa1(x.y());
  grad(0, 1) = qa(x.x()) * qa2(x.y());
  grad(1, 0) = -qa2(x.x()) * qa(x.y());
  grad(1, 1) = -qa1(x.x()) * qa1(x.y());
  return g * grad;
}

Eigen::Vector2d MMSCase::velocity_laplacian(const Eigen::Vector2d& x, double t) const {
  const double g = temporal(t);
  return {g * (qa2(x.x()) * qa1(x.y()) + qa(x.x()) * qa3(x.y())),
          -g * (qa3(x.x()) * qa(x.y()) + qa1(x.x()) * qa2(x.y()))};
}

Eigen::Vector2d MMSCase::velocity_dt(const Eigen::Vector2d& x, double t) const {
  return -velocity(x, t);
}

double MMSCase::pressure(const Eigen::Vector2d& x, double t) const {
  return (x.x() - 0.5) * (x.y() - 0.5) * std::cos(t);
}

Eigen::Vector2d MMSCase::pressure_gradient(const Eigen::Vector2d& x, double t) const {
  return {(x.y() - 0.5) * std::cos(t), (x.x() - 0.5) * std::cos(t)};
}

double MMSCase::memory_factor(double t) const {
  const double d = params.delta;
  if (std::abs(d - 1.0) <= 1e-9) return params.gamma * t * std::exp(-t);
  return params.gamma * (std::exp(-t) - std::exp(-d * t)) / (d - 1.0);
}

Eigen::Vector2d MMSCase::forcing(const Eigen::Vector2d& x, double t) const {
  const double g = temporal(t);
  const double ax = qa(x.x()), ax1 = qa1(x.x()), ax2 = qa2(x.x()), ax3 = qa3(x.x());
  const double ay = qa(x.y()), ay1 = qa1(x.y()), ay2 = qa2(x.y()), ay3 = qa3(x.y());
  const Eigen::Vector2d U(ax * ay1, -ax1 * ay);
  const Eigen::Vector2d lapU(ax2 * ay1 + ax * ay3, -(ax3 * ay + ax1 * ay2));
  const Eigen::Vector2d conv(ax * ax1 * (ay1 * ay1 - ay * ay2),
                             ay * ay1 * (ax1 * ax1 - ax * ax2));
  return -g * U + g * g * conv - (params.mu * g + memory_factor(t)) * lapU +
         pressure_gradient(x, t);
}

Forcing MMSCase::forcing_fn() const {
  MMSCase self = *this;
  return [self](const Eigen::Vector2d& x, double t) { return self.forcing(x, t); };
}

Forcing MMSCase::velocity_fn() const {
  MMSCase self = *this;
  return [self](const Eigen::Vector2d& x, double t) { return self.velocity(x, t); };
}

MMSCase mms_case(const std::string& id, const OldroydParams& params) {
  if (id != "default") throw std::invalid_argument("mms_case: unknown id '" + id + "'");
  MMSCase c;
  c.id = id;
  c.params = params;

  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const Eigen::Vector2d x(unif(rng), unif(rng));
    const double t = unif(rng);
    const Eigen::Matrix2d grad = c.velocity_gradient(x, t);
    if (std::abs(grad(0, 0) + grad(1, 1)) > 1e-12)
      throw std::logic_error("mms_case: velocity is not divergence-free");
  }
  for (int k = 0; k < 200; ++k) {
    const double s = unif(rng);
    const int edge = k % 4;
    const Eigen::Vector2d x = edge == 0   ? Eigen::Vector2d(s, 0.0)
                              : edge == 1 ? Eigen::Vector2d(s, 1.0)
                              : edge == 2 ? Eigen::Vector2d(0.0, s)
                                          : Eigen::Vector2d(1.0, s);
    if (c.velocity(x, unif(rng)).norm() > 1e-12)
      throw std::logic_error("mms_case: velocity does not vanish on the boundary");
  }
  // zero pressure mean over the unit square
  const QuadratureRule rule = quadrature_rule(8);
  const Mesh check_mesh = build_unit_square(4);
  double mean = 0.0;
  for (int t = 0; t < check_mesh.num_triangles(); ++t) {
    for (int q = 0; q < rule.size(); ++q) {
      const auto& b = rule.points[q];
      const auto& tri = check_mesh.triangles[t];
      const Eigen::Vector2d x = b[0] * check_mesh.vertices[tri[0]] +
                                b[1] * check_mesh.vertices[tri[1]] +
                                b[2] * check_mesh.vertices[tri[2]];
      mean += rule.weights[q] * (1.0 / 16.0) * c.pressure(x, 0.3);
    }
  }
  if (std::abs(mean) > 1e-12) throw std::logic_error("mms_case: pressure mean is not zero");
  return c;
}

ErrorNorms error_norms(const State& numeric, const MMSCase& exact, const FESpace& space,
                       double t) {
  const Mesh& mesh = space.mesh();
  const int nl = space.local_scalar_size();
  const int ns = space.scalar_dofs();
  const auto& table = space.basis_table(FESpace::kErrorNormDegree);
  const int nq = table.rule.size();

  double l2 = 0.0, h1 = 0.0, dp_sq = 0.0, dp_int = 0.0;
  Eigen::VectorXd ux(nl), uy(nl);
  Eigen::Vector3d ph;
  for (int tri = 0; tri < mesh.num_triangles(); ++tri) {
    const int cls = FESpace::geometry_class(tri);
    const int* dofs = space.element_dofs(tri);
    const auto& pdofs = space.pressure_dofs_of(tri);
    for (int i = 0; i < nl; ++i) {
      ux[i] = numeric.u[dofs[i]];
      uy[i] = numeric.u[ns + dofs[i]];
    }
    for (int j = 0; j < 3; ++j) ph[j] = numeric.p[pdofs[j]];
    for (int q = 0; q < nq; ++q) {
      const double qw = table.rule.weights[q] * table.jacobian;
      const auto& phi = table.values[cls][q];
      const auto& dphi = table.gradients[cls][q];
      const auto& psi = table.p1_values[cls][q];
      const Eigen::Vector2d x = space.physical_point(tri, table.rule.points[q]);

      const Eigen::Vector2d uh(phi.dot(ux), phi.dot(uy));
      const Eigen::Vector2d gx = dphi.transpose() * ux;
      const Eigen::Vector2d gy = dphi.transpose() * uy;
      const double phq = psi[0] * ph[0] + psi[1] * ph[1] + psi[2] * ph[2];

      const Eigen::Vector2d ue = exact.velocity(x, t);
      const Eigen::Matrix2d ge = exact.velocity_gradient(x, t);
      const double pe = exact.pressure(x, t);

      l2 += qw * (uh - ue).squaredNorm();
      h1 += qw * ((gx - ge.row(0).transpose()).squaredNorm() +
                  (gy - ge.row(1).transpose()).squaredNorm());
      const double dp = phq - pe;
      dp_sq += qw * dp * dp;
      dp_int += qw * dp;
    }
  }
  ErrorNorms norms;
  norms.velocity_l2 = std::sqrt(l2);
  norms.velocity_h1 = std::sqrt(h1);
  norms.pressure_l2 = std::sqrt(std::max(0.0, dp_sq - dp_int * dp_int));  // |Omega| = 1
  return norms;
}

ErrorNorms gap_norms(const State& a, const State& b, const AssembledOperators& ops) {
  if (a.u.size() != b.u.size() || a.p.size() != b.p.size())
    throw std::invalid_argument("gap_norms: states live on different spaces");
  const Vector du = a.u - b.u;
  const Vector dp = a.p - b.p;
  ErrorNorms norms;
  norms.velocity_l2 = std::sqrt(std::max(0.0, du.dot(ops.M * du)));
  norms.velocity_h1 = std::sqrt(std::max(0.0, du.dot(ops.A * du)));
  const Vector mp_ones = ops.Mp * Vector::Ones(dp.size());
  const double mean = mp_ones.dot(dp) / mp_ones.sum();
  const double q = dp.dot(ops.Mp * dp) - mean * mean * mp_ones.sum();
  norms.pressure_l2 = std::sqrt(std::max(0.0, q));
  return norms;
}

FittedOrders observed_order(const std::vector<double>& errors, const std::vector<double>& hs) {
  if (errors.size() != hs.size() || errors.size() < 2)
    throw std::invalid_argument("observed_order: need >= 2 matching entries");
  for (size_t i = 1; i < hs.size(); ++i)
    if (!(hs[i] < hs[i - 1]))
      throw std::invalid_argument("observed_order: mesh sizes must be strictly decreasing");
  FittedOrders fit;
  for (size_t i = 0; i + 1 < errors.size(); ++i) {
    if (errors[i] > 0 && errors[i + 1] > 0)
      fit.successive.push_back(std::log(errors[i] / errors[i + 1]) / std::log(hs[i] / hs[i + 1]));
    else
      fit.successive.push_back(0.0);
  }
  // least-squares slope of log e against log h
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (size_t i = 0; i < errors.size(); ++i) {
    if (errors[i] <= 0) continue;
    const double lx = std::log(hs[i]), ly = std::log(errors[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m >= 2 && sxx * m - sx * sx > 0) fit.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return fit;
}

}  // namespace oldroyd
