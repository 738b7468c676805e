#include "reinflow/rlcore/gae.hpp"

#include <cmath>

#include "reinflow/errors.hpp"

namespace reinflow::rlcore {

GaeResult gae_advantages(const Vector& rewards, const Vector& values, const std::vector<std::uint8_t>& dones,
                         const Vector& bootstrap, std::size_t n_envs, std::size_t n_steps, double gamma,
                         double lambda, bool normalize) {
  const auto n = static_cast<Eigen::Index>(n_envs * n_steps);
  if (rewards.size() != n || values.size() != n || dones.size() != static_cast<std::size_t>(n) ||
      bootstrap.size() != static_cast<Eigen::Index>(n_envs)) {
    throw ConfigError("GAE inputs have mismatched lengths");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0) || !(lambda >= 0.0 && lambda <= 1.0)) {
    throw ConfigError("GAE needs gamma and lambda in [0, 1]");
  }
  GaeResult out;
  out.raw_advantages = Vector::Zero(n);
  for (std::size_t e = 0; e < n_envs; ++e) {
    double next_adv = 0.0;
    double next_value = bootstrap(static_cast<Eigen::Index>(e));
    for (std::size_t s = n_steps; s-- > 0;) {
      const auto i = static_cast<Eigen::Index>(s * n_envs + e);
      const double live = dones[static_cast<std::size_t>(i)] != 0 ? 0.0 : 1.0;
      const double delta = rewards(i) + gamma * next_value * live - values(i);
      next_adv = delta + gamma * lambda * live * next_adv;
      out.raw_advantages(i) = next_adv;
      next_value = values(i);
    }
  }
  out.returns = out.raw_advantages + values;
  out.advantages = out.raw_advantages;
  if (normalize && n > 1) {
    const double mean = out.advantages.mean();
    const double var = (out.advantages.array() - mean).square().sum() / static_cast<double>(n - 1);
    out.advantages = ((out.advantages.array() - mean) / (std::sqrt(var) + 1e-8)).matrix();
  }
  return out;
}

GaeResult gae_advantages(const RolloutBuffer& b, double gamma, double lambda, bool normalize) {
  return gae_advantages(b.rewards, b.values, b.dones, b.bootstrap_values, b.n_envs, b.n_steps, gamma, lambda,
                        normalize);
}

}  // namespace reinflow::rlcore
