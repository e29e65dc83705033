#pragma once

#include <Eigen/Core>
#include <vector>

#include "oldroyd/assembly.hpp"

namespace oldroyd {

/// Physical constants of the order-one model and the derived coefficients of
/// the fading-memory kernel beta(t) = gamma * exp(-delta * t).
struct OldroydParams {
  double nu = 0, kappa = 0, lambda = 0;  ///< given
  double mu = 0, gamma = 0, delta = 0;   ///< derived: mu=2k/l, gamma=2(nu-k/l)/l, delta=1/l
};

/// mu = 2*kappa/lambda, gamma = 2*(nu - kappa/lambda)/lambda, delta = 1/lambda.
/// Requires nu > kappa/lambda so that gamma > 0.
OldroydParams derive_params(double nu, double kappa, double lambda);

/// Direct construction from the derived coefficients (all must be positive).
OldroydParams params_from_coefficients(double mu, double gamma, double delta);

enum class KernelRule {
  RIGHT_RECT,        ///< right-rectangle sum: acc(t_n) = sum_{m<=n} dt*gamma*e^{-delta(t_n-t_m)} u(t_m)
  PW_LINEAR_EXACT,   ///< exact convolution of the piecewise-linear history reconstruction
};

/// Per-step quadrature weights of the kernel convolution: the new sample's
/// (implicit) weight, the previous sample's weight, and the decay factor
/// applied to the accumulated history.
struct KernelWeights {
  double decay;    ///< e^{-delta*dt}
  double w_new;    ///< coefficient of u(t_{n+1})
  double w_prev;   ///< coefficient of u(t_n) (zero for RIGHT_RECT)
};
KernelWeights kernel_weights(KernelRule rule, double gamma, double delta, double dt);

/// Recursively updated memory accumulator representing
/// int_0^{t_n} beta(t_n - s) u(s) ds in coefficient space.
struct KernelState {
  Eigen::VectorXd accumulator;  ///< zero at t = 0
  Eigen::VectorXd prev_sample;  ///< latest history sample (piecewise-linear rule)
  double time = 0.0;
  bool record_history = false;  ///< debug: retain samples for the direct-sum oracle
  std::vector<Eigen::VectorXd> history;
  std::vector<double> history_times;

  static KernelState zero(int dofs, const Eigen::VectorXd* initial = nullptr);
};

/// Advance the accumulator by one step with the new end-of-step sample.
void kernel_update(KernelState& state, const Eigen::VectorXd& u_new, double dt,
                   KernelRule rule, const OldroydParams& params);

/// Galerkin right-hand-side contribution of the memory term: A * accumulator.
Eigen::VectorXd kernel_contribution(const KernelState& state, const SparseMatrix& A);

/// Discrete analogue of the kernel positivity form:
/// sum_n dt*phi_n * sum_{m<=n} dt*e^{-alpha(t_n - t_m)} * phi_m  (>= 0).
double kernel_quadratic_form(const std::vector<double>& phi, double alpha, double dt);

}  // namespace oldroyd
