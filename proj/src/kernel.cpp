#include "oldroyd/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace oldroyd {

OldroydParams derive_params(double nu, double kappa, double lambda) {
  if (nu <= 0 || kappa <= 0 || lambda <= 0)
    throw std::invalid_argument("derive_params: nu, kappa, lambda must be positive");
  if (nu <= kappa / lambda)
    throw std::invalid_argument("derive_params: need nu > kappa/lambda (gamma must be positive)");
  OldroydParams p;
  p.nu = nu;
  p.kappa = kappa;
  p.lambda = lambda;
  p.mu = 2.0 * kappa / lambda;
  p.gamma = 2.0 * (nu - kappa / lambda) / lambda;
  p.delta = 1.0 / lambda;
  return p;
}

OldroydParams params_from_coefficients(double mu, double gamma, double delta) {
  if (mu <= 0 || gamma <= 0 || delta <= 0)
    throw std::invalid_argument("params_from_coefficients: mu, gamma, delta must be positive");
  OldroydParams p;
  p.mu = mu;
  p.gamma = gamma;
  p.delta = delta;
  p.lambda = 1.0 / delta;
  p.kappa = mu * p.lambda / 2.0;
  p.nu = gamma * p.lambda / 2.0 + p.kappa / p.lambda;
  return p;
}

namespace {

// g2(x) = 1 - e^{-x}(1+x), evaluated without cancellation for small x.
double one_minus_exp_one_plus(double x) {
  if (x < 1e-2) {
    // sum_{k>=2} (-1)^k (k-1)/k! x^k
    return x * x * (1.0 / 2.0 + x * (-1.0 / 3.0 + x * (1.0 / 8.0 + x * (-1.0 / 30.0 + x * (1.0 / 144.0 - x / 840.0)))));
  }
  return 1.0 - std::exp(-x) * (1.0 + x);
}

}  // namespace

KernelWeights kernel_weights(KernelRule rule, double gamma, double delta, double dt) {
  if (dt <= 0) throw std::invalid_argument("kernel_weights: dt must be positive");
  const double x = delta * dt;
  KernelWeights w;
  w.decay = std::exp(-x);
  if (rule == KernelRule::RIGHT_RECT) {
    w.w_new = dt * gamma;
    w.w_prev = 0.0;
    return w;
  }
  // Piecewise-linear history: u(s) = u_n (tau/dt) + u_{n+1} (1 - tau/dt),
  // tau = t_{n+1} - s in [0, dt], against gamma e^{-delta tau}.
  const double g1 = -std::expm1(-x) / delta;                 // int e^{-delta tau} dtau
  const double g2 = one_minus_exp_one_plus(x) / (delta * delta);  // int tau e^{-delta tau} dtau
  w.w_prev = gamma * g2 / dt;
  w.w_new = gamma * (g1 - g2 / dt);
  return w;
}

KernelState KernelState::zero(int dofs, const Eigen::VectorXd* initial) {
  KernelState s;
  s.accumulator = Eigen::VectorXd::Zero(dofs);
  s.prev_sample = initial ? *initial : Eigen::VectorXd::Zero(dofs);
  s.time = 0.0;
  return s;
}

void kernel_update(KernelState& state, const Eigen::VectorXd& u_new, double dt,
                   KernelRule rule, const OldroydParams& params) {
  if (dt <= 0) throw std::invalid_argument("kernel_update: dt must be positive");
  if (u_new.size() != state.accumulator.size())
    throw std::invalid_argument("kernel_update: dimension mismatch");
  const KernelWeights w = kernel_weights(rule, params.gamma, params.delta, dt);
  state.accumulator = w.decay * state.accumulator + w.w_new * u_new;
  if (w.w_prev != 0.0) state.accumulator += w.w_prev * state.prev_sample;
  state.prev_sample = u_new;
  state.time += dt;
  if (state.record_history) {
    state.history.push_back(u_new);
    state.history_times.push_back(state.time);
  }
}

Eigen::VectorXd kernel_contribution(const KernelState& state, const SparseMatrix& A) {
  if (A.cols() != state.accumulator.size())
    throw std::invalid_argument("kernel_contribution: dimension mismatch");
  return A * state.accumulator;
}

double kernel_quadratic_form(const std::vector<double>& phi, double alpha, double dt) {
  if (alpha <= 0 || dt <= 0)
    throw std::invalid_argument("kernel_quadratic_form: alpha and dt must be positive");
  const double decay = std::exp(-alpha * dt);
  double inner = 0.0;  // sum_{m<=n} dt e^{-alpha(t_n-t_m)} phi_m, updated recursively
  double total = 0.0;
  for (double v : phi) {
    inner = decay * inner + dt * v;
    total += dt * v * inner;
  }
  return total;
}

}  // namespace oldroyd
