#include "reinflow/rlcore/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "reinflow/errors.hpp"

namespace reinflow::rlcore {

namespace {

constexpr std::uint64_t kPolicyStreamBase = std::uint64_t{1} << 20;
constexpr std::uint64_t kUpdateStream = std::uint64_t{1} << 21;

std::string describe_minibatch(std::size_t iter, std::size_t epoch, const std::vector<std::size_t>& idx,
                               const stochpolicy::ChainBatch& batch, const Vector& old_logp, const Vector& logp_new,
                               const Vector& adv, const Vector& returns) {
  std::ostringstream os;
  os.precision(17);
  os << "iteration " << iter << " epoch " << epoch << " minibatch of " << idx.size() << " samples\n";
  os << "sample,obs,old_logp,new_logp,advantage,return\n";
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const auto r = static_cast<Eigen::Index>(j);
    os << idx[j] << ",\"";
    for (Eigen::Index c = 0; c < batch.obs.cols(); ++c) os << (c ? " " : "") << batch.obs(r, c);
    os << "\"," << old_logp(r) << ',' << (r < logp_new.size() ? logp_new(r) : NAN) << ',' << adv(r) << ','
       << returns(r) << '\n';
  }
  return os.str();
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t j = 0; j < idx.size(); ++j) out.row(static_cast<Eigen::Index>(j)) = m.row(static_cast<Eigen::Index>(idx[j]));
  return out;
}

Vector gather(const Vector& v, const std::vector<std::size_t>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out(static_cast<Eigen::Index>(j)) = v(static_cast<Eigen::Index>(idx[j]));
  return out;
}

}  // namespace

void FinetuneConfig::validate() const {
  if (n_envs == 0 || n_steps == 0) throw ConfigError("n_envs and n_steps must be positive");
  ppo.validate();
  reg.validate();
  noise.validate();
  if (!(actor_weight_decay >= 0.0) || !(critic_weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
  if (!(reward_scale > 0.0) || !std::isfinite(reward_scale)) throw ConfigError("reward_scale must be positive");
}

const std::vector<std::string>& MetricsRow::columns() {
  static const std::vector<std::string> cols = {
      "iter",        "env_steps",     "mean_episode_reward_raw", "success_rate", "policy_loss",
      "value_loss",  "entropy_reg",   "w2_reg",                  "approx_kl",    "clip_fraction",
      "sigma_max_current", "actor_lr", "critic_lr",              "clamp_count"};
  return cols;
}

std::vector<double> MetricsRow::values() const {
  return {static_cast<double>(iter), static_cast<double>(env_steps), mean_episode_reward_raw, success_rate,
          policy_loss, value_loss, entropy_reg, w2_reg, approx_kl, clip_fraction, sigma_max_current, actor_lr,
          critic_lr, static_cast<double>(clamp_count)};
}

TrainerState TrainerState::create(stochpolicy::NoisyFlowPolicy pretrained, Critic critic,
                                  const envsim::PointMassConfig& env, const FinetuneConfig& config,
                                  std::uint64_t seed) {
  config.validate();
  pretrained.validate();
  if (critic.obs_dim() != envsim::PointMassConfig::obs_dim()) throw ConfigError("critic input width must match the env");
  const MlpParams* actor_nets[] = {&pretrained.velocity.net(), &pretrained.noise.net};
  auto actor_opt = numerics::AdamState::for_params(actor_nets, config.actor_weight_decay);
  auto critic_opt = numerics::AdamState::for_params(critic.net, config.critic_weight_decay);
  envsim::VecEnv venv(env, config.n_envs, seed);
  stochpolicy::NoisyFlowPolicy reference = pretrained;
  return TrainerState{std::move(pretrained),
                      std::move(reference),
                      std::move(critic),
                      std::move(actor_opt),
                      std::move(critic_opt),
                      std::move(venv),
                      numerics::make_streams(seed, config.n_envs, kPolicyStreamBase),
                      numerics::SeededRng(seed, kUpdateStream),
                      RewardScaler(config.n_envs, config.ppo.gamma),
                      0,
                      {},
                      {},
                      0,
                      0,
                      false};
}

ActorLoss actor_loss(const stochpolicy::NoisyFlowPolicy& policy, const stochpolicy::NoisyFlowPolicy& reference,
                     const stochpolicy::ChainBatch& batch, const Vector& old_logp, const Vector& advantages,
                     double clip_eps, const RegularizerConfig& reg, numerics::SeededRng& rng) {
  ActorLoss out;
  out.grads = stochpolicy::PolicyGrads::zeros_like(policy);
  const auto eval = stochpolicy::evaluate_chains(policy, batch);
  out.logp_new = eval.logprob;
  if (!out.logp_new.allFinite()) {
    out.total = out.policy_loss = NAN;
    return out;
  }
  const auto ppo = ppo_clip_loss(eval.logprob, old_logp, advantages, clip_eps);
  out.policy_loss = ppo.loss;
  out.clip_fraction = ppo.clip_fraction;
  out.clamp_count = ppo.clamp_count;

  const EntropyTerm ent = entropy_from_sigmas(eval.sigma, policy.chunk_dim());
  out.entropy = ent.value;
  std::vector<Matrix> grad_sigma;
  if (reg.entropy_coef != 0.0) {
    grad_sigma.reserve(ent.grad_sigma.size());
    for (const auto& g : ent.grad_sigma) grad_sigma.push_back(reg.entropy_coef * g);
  }
  stochpolicy::backprop_chains(policy, batch, eval, ppo.grad_logp_new, grad_sigma.empty() ? nullptr : &grad_sigma,
                               out.grads);

  out.total = out.policy_loss + reg.entropy_coef * out.entropy;
  if (reg.w2_coef > 0.0) {
    Matrix obs = batch.obs;
    if (reg.w2_samples > 0 && reg.w2_samples < batch.size()) obs = batch.obs.topRows(static_cast<Eigen::Index>(reg.w2_samples));
    const auto w2 = w2_regularizer(policy, reference, obs, rng);
    out.w2 = w2.value;
    out.total += reg.w2_coef * w2.value;
    out.grads.add_scaled(w2.grads, reg.w2_coef);
  }
  return out;
}

MetricsRow finetune_iteration(TrainerState& s, const FinetuneConfig& cfg) {
  const std::size_t iter = s.iteration;
  MetricsRow row;
  row.iter = iter;
  row.sigma_max_current = stochpolicy::noise_bound_at(cfg.noise, iter, s.policy.noise.sigma_min, s.policy.noise.sigma_max);
  s.policy.sigma_max_current = row.sigma_max_current;
  row.actor_lr = numerics::schedule_lr(cfg.actor_lr, iter);
  row.critic_lr = numerics::schedule_lr(cfg.critic_lr, iter);

  // (1) rollout
  RolloutBuffer buf = envsim::vec_rollout(s.policy, s.venv, cfg.n_steps, s.policy_streams);
  row.env_steps = s.venv.total_steps();

  // (2) rewards used for learning
  for (std::size_t step = 0; step < cfg.n_steps; ++step) {
    std::vector<double> r(cfg.n_envs);
    std::vector<std::uint8_t> d(cfg.n_envs);
    for (std::size_t e = 0; e < cfg.n_envs; ++e) {
      r[e] = cfg.reward_scale * buf.raw_rewards(static_cast<Eigen::Index>(buf.index(step, e)));
      d[e] = buf.dones[buf.index(step, e)];
    }
    if (cfg.normalize_rewards) r = s.scaler.normalize(r, d);
    for (std::size_t e = 0; e < cfg.n_envs; ++e) buf.rewards(static_cast<Eigen::Index>(buf.index(step, e))) = r[e];
  }

  // (3) values and advantages
  buf.values = s.critic.values(buf.observations);
  buf.bootstrap_values = s.critic.values(buf.final_observations);
  buf.validate();
  const GaeResult gae = gae_advantages(buf, cfg.ppo.gamma, cfg.ppo.gae_lambda, cfg.ppo.normalize_advantages);

  // Episode statistics: keep the latest n_envs finished episodes.
  for (std::size_t i = 0; i < buf.episode_returns.size(); ++i) {
    s.recent_returns.push_back(buf.episode_returns[i]);
    s.recent_successes.push_back(buf.episode_successes[i]);
  }
  if (s.recent_returns.size() > cfg.n_envs) {
    const auto drop = static_cast<std::ptrdiff_t>(s.recent_returns.size() - cfg.n_envs);
    s.recent_returns.erase(s.recent_returns.begin(), s.recent_returns.begin() + drop);
    s.recent_successes.erase(s.recent_successes.begin(), s.recent_successes.begin() + drop);
  }
  if (!s.recent_returns.empty()) {
    row.mean_episode_reward_raw =
        std::accumulate(s.recent_returns.begin(), s.recent_returns.end(), 0.0) / static_cast<double>(s.recent_returns.size());
    row.success_rate = std::accumulate(s.recent_successes.begin(), s.recent_successes.end(), 0.0) /
                       static_cast<double>(s.recent_successes.size());
  }

  // (4)-(6) PPO epochs. The stored chains and old log-probs are the snapshot.
  const bool actor_active = iter >= cfg.ppo.critic_warmup_iters;
  const std::size_t n = buf.size();
  const std::size_t mb = std::min(cfg.ppo.minibatch_size, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  s.last_actor_updates = 0;
  s.last_critic_updates = 0;
  s.last_kl_stop = false;
  double sum_policy = 0.0, sum_value = 0.0, sum_entropy = 0.0, sum_w2 = 0.0, sum_kl = 0.0, sum_clip = 0.0;
  std::size_t evaluated = 0;

  for (std::size_t epoch = 0; epoch < cfg.ppo.update_epochs && !s.last_kl_stop; ++epoch) {
    s.update_rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t stop = std::min(start + mb, n);
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(stop));
      const auto batch = stochpolicy::ChainBatch::gather(buf.chains, buf.observations, idx);
      const Vector old_logp = gather(buf.old_logprobs, idx);
      const Vector adv = gather(gae.advantages, idx);
      const Vector ret = gather(gae.returns, idx);

      ActorLoss actor;
      if (actor_active) {
        actor = actor_loss(s.policy, s.reference, batch, old_logp, adv, cfg.ppo.clip_eps, cfg.reg, s.update_rng);
        if (!std::isfinite(actor.total)) {
          throw TrainingAbort("non-finite actor loss",
                              describe_minibatch(iter, epoch, idx, batch, old_logp, actor.logp_new, adv, ret));
        }
        const double kl = approx_kl(actor.logp_new, old_logp);
        if (kl > cfg.ppo.target_kl) {
          s.last_kl_stop = true;
          sum_kl += kl;
          ++evaluated;
          break;
        }
        sum_kl += kl;
      }
      const Matrix obs = gather_rows(buf.observations, idx);
      const auto critic = critic_loss(s.critic, obs, ret, cfg.ppo.critic_coef);
      if (!std::isfinite(critic.loss)) {
        throw TrainingAbort("non-finite critic loss",
                            describe_minibatch(iter, epoch, idx, batch, old_logp, actor.logp_new, adv, ret));
      }
      ++evaluated;
      sum_value += critic.loss;
      if (actor_active) {
        sum_policy += actor.policy_loss;
        sum_entropy += actor.entropy;
        sum_w2 += actor.w2;
        sum_clip += actor.clip_fraction;
        row.clamp_count += actor.clamp_count;
        numerics::MlpParams* nets[] = {&s.policy.velocity.net(), &s.policy.noise.net};
        const numerics::MlpParams* grads[] = {&actor.grads.velocity, &actor.grads.noise};
        numerics::adam_update(s.actor_opt, nets, grads, row.actor_lr);
        ++s.last_actor_updates;
      }
      numerics::adam_update(s.critic_opt, s.critic.net, critic.grads, row.critic_lr);
      ++s.last_critic_updates;
    }
  }

  const double denom = static_cast<double>(std::max<std::size_t>(s.last_critic_updates, 1));
  row.value_loss = sum_value / denom;
  if (actor_active) {
    const double a_denom = static_cast<double>(std::max<std::size_t>(s.last_actor_updates, 1));
    row.policy_loss = sum_policy / a_denom;
    row.entropy_reg = sum_entropy / a_denom;
    row.w2_reg = sum_w2 / a_denom;
    row.clip_fraction = sum_clip / a_denom;
    row.approx_kl = sum_kl / static_cast<double>(std::max<std::size_t>(evaluated, 1));
  }
  ++s.iteration;
  return row;
}

}  // namespace reinflow::rlcore
