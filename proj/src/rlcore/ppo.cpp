#include "reinflow/rlcore/ppo.hpp"

#include <algorithm>
#include <cmath>

#include "reinflow/errors.hpp"

namespace reinflow::rlcore {

void PpoConfig::validate() const {
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("clip_eps must lie in (0, 1)");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("gae_lambda must lie in [0, 1]");
  if (update_epochs == 0) throw ConfigError("update_epochs must be positive");
  if (minibatch_size == 0) throw ConfigError("minibatch_size must be positive");
  if (!(target_kl > 0.0)) throw ConfigError("target_kl must be positive");
  if (!(critic_coef >= 0.0) || !std::isfinite(critic_coef)) throw ConfigError("critic_coef must be non-negative");
}

PpoLossResult ppo_clip_loss(const Vector& logp_new, const Vector& logp_old, const Vector& adv, double eps) {
  const auto n = logp_new.size();
  if (logp_old.size() != n || adv.size() != n) throw ConfigError("ppo_clip_loss inputs have mismatched lengths");
  if (n == 0) throw ConfigError("ppo_clip_loss needs at least one sample");
  if (!logp_new.allFinite() || !logp_old.allFinite()) throw NumericError("non-finite log-probability in PPO loss");

  PpoLossResult out;
  out.ratios.resize(n);
  out.grad_logp_new = Vector::Zero(n);
  double total = 0.0;
  std::size_t clipped = 0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double raw = logp_new(i) - logp_old(i);
    const double log_ratio = std::clamp(raw, -kLogRatioClamp, kLogRatioClamp);
    const bool clamped = log_ratio != raw;
    if (clamped) ++out.clamp_count;
    const double rho = std::exp(log_ratio);
    out.ratios(i) = rho;
    const double a = adv(i);
    const double unclipped = rho * a;
    const double clipped_term = std::clamp(rho, 1.0 - eps, 1.0 + eps) * a;
    if (std::abs(rho - 1.0) > eps) ++clipped;
    if (unclipped <= clipped_term) {
      total += unclipped;
      // d(rho A)/d logp = rho A; zero where the clamp is active.
      if (!clamped) out.grad_logp_new(i) = -rho * a * inv_n;
    } else {
      total += clipped_term;
    }
  }
  out.loss = -total * inv_n;
  out.clip_fraction = static_cast<double>(clipped) * inv_n;
  return out;
}

double approx_kl(const Vector& logp_new, const Vector& logp_old) {
  if (logp_new.size() != logp_old.size()) throw ConfigError("approx_kl inputs have mismatched lengths");
  if (logp_new.size() == 0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < logp_new.size(); ++i) {
    const double lr = std::clamp(logp_new(i) - logp_old(i), -kLogRatioClamp, kLogRatioClamp);
    // expm1 keeps the small-ratio regime accurate.
    sum += std::expm1(lr) - lr;
  }
  return sum / static_cast<double>(logp_new.size());
}

}  // namespace reinflow::rlcore
