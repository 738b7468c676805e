#include "reinflow/envsim/vec_env.hpp"

#include <string>

#include "reinflow/errors.hpp"
#include "reinflow/stochpolicy/chain.hpp"

namespace reinflow::envsim {

namespace {

std::span<const double> row_span(const Matrix& m, Eigen::Index r) {
  // Matrix is row-major, so a row is contiguous.
  return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace

VecEnv::VecEnv(const PointMassConfig& config, std::size_t n_envs, std::uint64_t seed)
    : config_(config),
      rngs_(numerics::make_streams(seed, n_envs)),
      episode_returns_(n_envs, 0.0),
      episode_success_(n_envs, 0) {
  if (n_envs == 0) throw ConfigError("VecEnv needs at least one env");
  config_.validate();
  envs_.assign(n_envs, PointMassEnv(config_));
  obs_.resize(static_cast<Eigen::Index>(n_envs), static_cast<Eigen::Index>(PointMassConfig::obs_dim()));
  for (std::size_t e = 0; e < n_envs; ++e) obs_.row(static_cast<Eigen::Index>(e)) = envs_[e].reset(rngs_[e]).transpose();
}

VecEnv::StepBatch VecEnv::step(const Matrix& chunks) {
  const auto n = static_cast<Eigen::Index>(envs_.size());
  if (chunks.rows() != n || static_cast<std::size_t>(chunks.cols()) != config_.chunk_dim()) {
    throw ConfigError("VecEnv::step: chunk matrix has the wrong shape");
  }
  StepBatch out;
  out.next_obs.resize(n, obs_.cols());
  out.rewards.resize(n);
  out.dones.assign(envs_.size(), 0);
  out.successes.assign(envs_.size(), 0);
  for (Eigen::Index e = 0; e < n; ++e) {
    const auto i = static_cast<std::size_t>(e);
    StepResult r;
    try {
      r = envs_[i].step_chunk(row_span(chunks, e), rngs_[i]);
    } catch (const ContractError& err) {
      throw ContractError("env " + std::to_string(i) + ": " + err.what());
    }
    out.rewards(e) = r.reward;
    out.dones[i] = r.done ? 1 : 0;
    out.successes[i] = r.success ? 1 : 0;
    episode_returns_[i] += r.reward;
    episode_success_[i] = episode_success_[i] | out.successes[i];
    if (r.done) {
      out.finished_returns.push_back(episode_returns_[i]);
      out.finished_successes.push_back(episode_success_[i]);
      episode_returns_[i] = 0.0;
      episode_success_[i] = 0;
      r.observation = envs_[i].reset(rngs_[i]);
    }
    out.next_obs.row(e) = r.observation.transpose();
  }
  obs_ = out.next_obs;
  total_steps_ += envs_.size();
  return out;
}

rlcore::RolloutBuffer vec_rollout(const stochpolicy::NoisyFlowPolicy& policy, VecEnv& venv, std::size_t n_steps,
                                  std::span<numerics::SeededRng> policy_streams) {
  const std::size_t n = venv.size();
  if (policy_streams.size() != n) throw ConfigError("vec_rollout needs one policy stream per env");
  if (policy.cond_dim() != PointMassConfig::obs_dim() || policy.chunk_dim() != venv.config().chunk_dim()) {
    throw ConfigError("policy dimensions do not match the environment");
  }
  auto buf = rlcore::RolloutBuffer::allocate(n, n_steps, PointMassConfig::obs_dim(), policy.chunk_dim());
  for (std::size_t s = 0; s < n_steps; ++s) {
    const Matrix obs = venv.observations();
    auto chains = stochpolicy::sample_chains(policy, obs, policy_streams);
    Matrix executed(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(policy.chunk_dim()));
    for (std::size_t e = 0; e < n; ++e) {
      executed.row(static_cast<Eigen::Index>(e)) = chains[e].actions.bottomRows(1).cwiseMax(-1.0).cwiseMin(1.0);
    }
    const auto step = venv.step(executed);
    for (std::size_t e = 0; e < n; ++e) {
      const auto i = static_cast<Eigen::Index>(buf.index(s, e));
      const auto row = static_cast<Eigen::Index>(e);
      buf.observations.row(i) = obs.row(row);
      buf.executed.row(i) = executed.row(row);
      buf.raw_rewards(i) = step.rewards(row);
      buf.rewards(i) = step.rewards(row);
      buf.dones[static_cast<std::size_t>(i)] = step.dones[e];
      buf.successes[static_cast<std::size_t>(i)] = step.successes[e];
      buf.old_logprobs(i) = chains[e].transition_logprob_sum();
      buf.chains[static_cast<std::size_t>(i)] = std::move(chains[e]);
    }
    buf.episode_returns.insert(buf.episode_returns.end(), step.finished_returns.begin(), step.finished_returns.end());
    buf.episode_successes.insert(buf.episode_successes.end(), step.finished_successes.begin(),
                                 step.finished_successes.end());
  }
  buf.final_observations = venv.observations();
  return buf;
}

EvalResult evaluate_policy(const stochpolicy::NoisyFlowPolicy& policy, const PointMassConfig& config,
                           std::size_t episodes, std::uint64_t seed) {
  EvalResult out;
  if (episodes == 0) return out;
  std::vector<PointMassEnv> envs(episodes, PointMassEnv(config));
  std::vector<numerics::SeededRng> rngs;
  Matrix obs(static_cast<Eigen::Index>(episodes), static_cast<Eigen::Index>(PointMassConfig::obs_dim()));
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    rngs.emplace_back(seed, ep);
    obs.row(static_cast<Eigen::Index>(ep)) = envs[ep].reset(rngs[ep]).transpose();
  }
  out.returns.assign(episodes, 0.0);
  out.successes.assign(episodes, 0);
  std::vector<std::size_t> live(episodes);
  for (std::size_t i = 0; i < episodes; ++i) live[i] = i;
  while (!live.empty()) {
    Matrix live_obs(static_cast<Eigen::Index>(live.size()), obs.cols());
    for (std::size_t j = 0; j < live.size(); ++j) live_obs.row(static_cast<Eigen::Index>(j)) = obs.row(static_cast<Eigen::Index>(live[j]));
    const Matrix actions = stochpolicy::act_deterministic_batch(policy, live_obs).cwiseMax(-1.0).cwiseMin(1.0);
    std::vector<std::size_t> still;
    for (std::size_t j = 0; j < live.size(); ++j) {
      const std::size_t ep = live[j];
      const StepResult r = envs[ep].step_chunk(row_span(actions, static_cast<Eigen::Index>(j)), rngs[ep]);
      out.returns[ep] += r.reward;
      if (r.success) out.successes[ep] = 1;
      obs.row(static_cast<Eigen::Index>(ep)) = r.observation.transpose();
      if (!r.done) still.push_back(ep);
    }
    live.swap(still);
  }
  for (std::size_t i = 0; i < episodes; ++i) {
    out.mean_return += out.returns[i];
    out.success_rate += out.successes[i];
  }
  out.mean_return /= static_cast<double>(episodes);
  out.success_rate /= static_cast<double>(episodes);
  return out;
}

}  // namespace reinflow::envsim
