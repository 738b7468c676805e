#pragma once

#include <cstddef>

#include "reinflow/numerics/mlp.hpp"

namespace reinflow::rlcore {

using numerics::Vector;

struct PpoConfig {
  double clip_eps = 0.01;
  std::size_t update_epochs = 5;
  std::size_t minibatch_size = 50000;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double target_kl = 1.0;
  double critic_coef = 0.5;
  std::size_t critic_warmup_iters = 0;
  bool normalize_advantages = true;

  void validate() const;
};

// Log-ratios are clamped to this magnitude before exponentiation.
inline constexpr double kLogRatioClamp = 20.0;

struct PpoLossResult {
  double loss = 0.0;
  Vector ratios;
  Vector grad_logp_new;  // d loss / d logp_new
  double clip_fraction = 0.0;
  std::size_t clamp_count = 0;
};

// mean_i -min(rho_i A_i, clip(rho_i, 1-eps, 1+eps) A_i), rho = exp(logp_new - logp_old).
PpoLossResult ppo_clip_loss(const Vector& logp_new, const Vector& logp_old, const Vector& advantages,
                            double clip_eps);

// mean(rho - 1 - ln rho); non-negative.
double approx_kl(const Vector& logp_new, const Vector& logp_old);

}  // namespace reinflow::rlcore
