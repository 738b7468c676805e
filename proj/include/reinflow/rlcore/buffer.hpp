#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "reinflow/stochpolicy/chain.hpp"

namespace reinflow::rlcore {

using numerics::Matrix;
using numerics::Vector;

// On-policy batch laid out step-major: sample (step, env) lives at
// index(step, env) = step * n_envs + env.
struct RolloutBuffer {
  std::size_t n_envs = 0;
  std::size_t n_steps = 0;

  Matrix observations;                          // N x obs_dim
  std::vector<stochpolicy::DenoisingChain> chains;
  Matrix executed;                              // N x chunk_dim, clipped to [-1, 1]
  Vector raw_rewards;                           // chunk reward as returned by the env
  Vector rewards;                               // reward used for learning (after normalisation)
  std::vector<std::uint8_t> dones;
  std::vector<std::uint8_t> successes;
  Vector values;
  Vector old_logprobs;                          // transition log-prob sum (a^0 term excluded)
  Matrix final_observations;                    // n_envs x obs_dim, observation after the last step
  Vector bootstrap_values;                      // n_envs

  // Episodes that finished during this rollout.
  std::vector<double> episode_returns;
  std::vector<std::uint8_t> episode_successes;

  static RolloutBuffer allocate(std::size_t n_envs, std::size_t n_steps, std::size_t obs_dim, std::size_t chunk_dim);

  std::size_t size() const { return n_envs * n_steps; }
  std::size_t index(std::size_t step, std::size_t env) const { return step * n_envs + env; }

  // Throws ConfigError when array lengths disagree or old log-probs are not finite.
  void validate() const;
};

}  // namespace reinflow::rlcore
