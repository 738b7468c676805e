#include "reinflow/rlcore/buffer.hpp"

#include "reinflow/errors.hpp"

namespace reinflow::rlcore {

RolloutBuffer RolloutBuffer::allocate(std::size_t n_envs, std::size_t n_steps, std::size_t obs_dim,
                                      std::size_t chunk_dim) {
  RolloutBuffer b;
  b.n_envs = n_envs;
  b.n_steps = n_steps;
  const auto n = static_cast<Eigen::Index>(n_envs * n_steps);
  b.observations.resize(n, static_cast<Eigen::Index>(obs_dim));
  b.chains.resize(static_cast<std::size_t>(n));
  b.executed.resize(n, static_cast<Eigen::Index>(chunk_dim));
  b.raw_rewards = Vector::Zero(n);
  b.rewards = Vector::Zero(n);
  b.dones.assign(static_cast<std::size_t>(n), 0);
  b.successes.assign(static_cast<std::size_t>(n), 0);
  b.values = Vector::Zero(n);
  b.old_logprobs = Vector::Zero(n);
  b.final_observations.resize(static_cast<Eigen::Index>(n_envs), static_cast<Eigen::Index>(obs_dim));
  b.bootstrap_values = Vector::Zero(static_cast<Eigen::Index>(n_envs));
  return b;
}

void RolloutBuffer::validate() const {
  const auto n = static_cast<Eigen::Index>(size());
  if (observations.rows() != n || executed.rows() != n || raw_rewards.size() != n || rewards.size() != n ||
      values.size() != n || old_logprobs.size() != n || chains.size() != size() || dones.size() != size() ||
      successes.size() != size()) {
    throw ConfigError("rollout buffer arrays have inconsistent lengths");
  }
  if (bootstrap_values.size() != static_cast<Eigen::Index>(n_envs)) {
    throw ConfigError("rollout buffer needs one bootstrap value per env");
  }
  if (!old_logprobs.allFinite()) throw ConfigError("rollout buffer holds non-finite log-probabilities");
}

}  // namespace reinflow::rlcore
