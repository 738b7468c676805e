#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "reinflow/envsim/expert.hpp"
#include "reinflow/envsim/point_mass.hpp"
#include "reinflow/rlcore/buffer.hpp"
#include "reinflow/stochpolicy/policy.hpp"

namespace reinflow::envsim {

using numerics::Matrix;

// n independent point-mass instances, each with its own stream. Envs that
// finish are reset immediately; the observation returned for them belongs to
// the new episode.
class VecEnv {
 public:
  VecEnv(const PointMassConfig& config, std::size_t n_envs, std::uint64_t seed);

  struct StepBatch {
    Matrix next_obs;
    Vector rewards;
    std::vector<std::uint8_t> dones;
    std::vector<std::uint8_t> successes;
    std::vector<double> finished_returns;
    std::vector<std::uint8_t> finished_successes;
  };

  // Row e of `chunks` goes to env e.
  StepBatch step(const Matrix& chunks);

  std::size_t size() const { return envs_.size(); }
  const PointMassConfig& config() const { return config_; }
  const Matrix& observations() const { return obs_; }
  std::uint64_t total_steps() const { return total_steps_; }

  // Raw state, for checkpoints.
  std::vector<PointMassEnv>& envs() { return envs_; }
  const std::vector<PointMassEnv>& envs() const { return envs_; }
  std::vector<numerics::SeededRng>& rngs() { return rngs_; }
  const std::vector<numerics::SeededRng>& rngs() const { return rngs_; }
  std::vector<double>& episode_returns() { return episode_returns_; }
  const std::vector<double>& episode_returns() const { return episode_returns_; }
  std::vector<std::uint8_t>& episode_success() { return episode_success_; }
  const std::vector<std::uint8_t>& episode_success() const { return episode_success_; }
  Matrix& observations_mut() { return obs_; }
  std::uint64_t& total_steps_mut() { return total_steps_; }

 private:
  PointMassConfig config_;
  std::vector<PointMassEnv> envs_;
  std::vector<numerics::SeededRng> rngs_;
  std::vector<double> episode_returns_;
  std::vector<std::uint8_t> episode_success_;
  Matrix obs_;
  std::uint64_t total_steps_ = 0;
};

// Advances every env n_steps macro-steps with chains sampled from `policy`
// (row e draws from policy_streams[e]). Executed chunks are a^K clipped to
// [-1, 1]. Values and bootstrap values are left at zero for the caller.
rlcore::RolloutBuffer vec_rollout(const stochpolicy::NoisyFlowPolicy& policy, VecEnv& venv, std::size_t n_steps,
                                  std::span<numerics::SeededRng> policy_streams);

// Deterministic (noise-free, a^0 = 0) evaluation over `episodes` episodes,
// using the same per-episode reset streams as evaluate_expert.
EvalResult evaluate_policy(const stochpolicy::NoisyFlowPolicy& policy, const PointMassConfig& config,
                           std::size_t episodes, std::uint64_t seed);

}  // namespace reinflow::envsim
