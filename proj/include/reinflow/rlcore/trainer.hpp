#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "reinflow/envsim/vec_env.hpp"
#include "reinflow/errors.hpp"
#include "reinflow/numerics/optim.hpp"
#include "reinflow/rlcore/critic.hpp"
#include "reinflow/rlcore/gae.hpp"
#include "reinflow/rlcore/ppo.hpp"
#include "reinflow/rlcore/regularizers.hpp"
#include "reinflow/rlcore/reward_scaler.hpp"
#include "reinflow/stochpolicy/noise_schedule.hpp"

namespace reinflow::rlcore {

struct FinetuneConfig {
  std::size_t n_envs = 40;
  std::size_t n_steps = 500;
  std::size_t iterations = 1000;
  PpoConfig ppo;
  RegularizerConfig reg;
  stochpolicy::NoiseSchedule noise;
  numerics::LrSchedule actor_lr{4.5e-5, 2.0e-5, 10, 100, numerics::LrScheduleKind::CosineWarmRestart};
  numerics::LrSchedule critic_lr{6.5e-4, 3.0e-4, 10, 100, numerics::LrScheduleKind::CosineWarmRestart};
  double actor_weight_decay = 0.0;
  double critic_weight_decay = 1e-5;
  bool normalize_rewards = true;
  double reward_scale = 1.0;

  void validate() const;
};

struct MetricsRow {
  std::size_t iter = 0;
  std::uint64_t env_steps = 0;
  double mean_episode_reward_raw = 0.0;
  double success_rate = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy_reg = 0.0;
  double w2_reg = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double sigma_max_current = 0.0;
  double actor_lr = 0.0;
  double critic_lr = 0.0;
  std::size_t clamp_count = 0;

  static const std::vector<std::string>& columns();
  // Same order as columns().
  std::vector<double> values() const;
};

// Everything that evolves during fine-tuning; enough to resume bit-exactly.
struct TrainerState {
  stochpolicy::NoisyFlowPolicy policy;
  stochpolicy::NoisyFlowPolicy reference;  // frozen pre-fine-tuning snapshot
  Critic critic;
  numerics::AdamState actor_opt;
  numerics::AdamState critic_opt;
  envsim::VecEnv venv;
  std::vector<numerics::SeededRng> policy_streams;
  numerics::SeededRng update_rng;
  RewardScaler scaler;
  std::size_t iteration = 0;
  // Returns and successes of the most recently finished episodes (at most n_envs).
  std::vector<double> recent_returns;
  std::vector<std::uint8_t> recent_successes;

  // Diagnostics of the last iteration.
  std::size_t last_actor_updates = 0;
  std::size_t last_critic_updates = 0;
  bool last_kl_stop = false;

  static TrainerState create(stochpolicy::NoisyFlowPolicy pretrained, Critic critic,
                             const envsim::PointMassConfig& env, const FinetuneConfig& config, std::uint64_t seed);
};

// Raised when a minibatch produces a non-finite loss. `dump()` describes the
// offending minibatch.
class TrainingAbort : public NumericError {
 public:
  TrainingAbort(const std::string& what, std::string dump) : NumericError(what), dump_(std::move(dump)) {}
  const std::string& dump() const { return dump_; }

 private:
  std::string dump_;
};

struct ActorLoss {
  double total = 0.0;
  double policy_loss = 0.0;
  double entropy = 0.0;
  double w2 = 0.0;
  double clip_fraction = 0.0;
  std::size_t clamp_count = 0;
  Vector logp_new;
  stochpolicy::PolicyGrads grads;
};

// PPO clipped surrogate over summed transition log-probs plus
// entropy_coef * R_h + w2_coef * R_W2, with gradients w.r.t. [theta, theta'].
ActorLoss actor_loss(const stochpolicy::NoisyFlowPolicy& policy, const stochpolicy::NoisyFlowPolicy& reference,
                     const stochpolicy::ChainBatch& batch, const Vector& old_logp, const Vector& advantages,
                     double clip_eps, const RegularizerConfig& reg, numerics::SeededRng& rng);

// Rollout, reward normalisation, GAE, then PPO epochs with KL early stop.
MetricsRow finetune_iteration(TrainerState& state, const FinetuneConfig& config);

}  // namespace reinflow::rlcore
