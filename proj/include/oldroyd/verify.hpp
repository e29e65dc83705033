#pragma once

#include <string>
#include <vector>

#include "oldroyd/stepping.hpp"

namespace oldroyd {

/// Manufactured solution with closed-form forcing, including the memory
/// integral. The velocity comes from a stream function (incompressibility is
/// structural) that vanishes to quartic order on the boundary; the temporal
/// factor e^{-t} gives the memory integral a one-line closed form.
struct MMSCase {
  std::string id;
  OldroydParams params;

  Eigen::Vector2d velocity(const Eigen::Vector2d& x, double t) const;
  Eigen::Matrix2d velocity_gradient(const Eigen::Vector2d& x, double t) const;  ///< (i,j) = du_i/dx_j
  Eigen::Vector2d velocity_laplacian(const Eigen::Vector2d& x, double t) const;
  Eigen::Vector2d velocity_dt(const Eigen::Vector2d& x, double t) const;
  double pressure(const Eigen::Vector2d& x, double t) const;
  Eigen::Vector2d pressure_gradient(const Eigen::Vector2d& x, double t) const;

  /// int_0^t gamma e^{-delta(t-s)} e^{-s} ds; explicit branch at delta = 1.
  double memory_factor(double t) const;

  /// Forcing assembled from the momentum balance with the closed-form memory term.
  Eigen::Vector2d forcing(const Eigen::Vector2d& x, double t) const;

  Forcing forcing_fn() const;
  Forcing velocity_fn() const;
};

/// Known ids: "default". Construction validates incompressibility, the
/// boundary values and the zero pressure mean at random sample points.
MMSCase mms_case(const std::string& id, const OldroydParams& params);

struct ErrorNorms {
  double velocity_l2 = 0.0;
  double velocity_h1 = 0.0;  ///< seminorm
  double pressure_l2 = 0.0;  ///< after mean-zeroing both fields
};

/// Element-wise quadrature of the discrete-vs-exact errors at time t.
ErrorNorms error_norms(const State& numeric, const MMSCase& exact, const FESpace& space,
                       double t);

/// Norms of the coefficient difference of two states on the same space,
/// via the M, A, Mp quadratic forms.
ErrorNorms gap_norms(const State& a, const State& b, const AssembledOperators& ops);

struct FittedOrders {
  std::vector<double> successive;  ///< log(e_i/e_{i+1}) / log(h_i/h_{i+1})
  double slope = 0.0;              ///< least-squares slope of log e vs log h
};

/// Requires >= 2 entries and strictly decreasing mesh sizes.
FittedOrders observed_order(const std::vector<double>& errors, const std::vector<double>& hs);

}  // namespace oldroyd
