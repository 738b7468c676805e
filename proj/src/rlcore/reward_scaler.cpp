#include "reinflow/rlcore/reward_scaler.hpp"

#include <algorithm>
#include <cmath>

#include "reinflow/errors.hpp"

namespace reinflow::rlcore {

void RunningMeanStd::update(std::span<const double> batch) {
  if (batch.empty()) return;
  double b_mean = 0.0;
  for (double x : batch) b_mean += x;
  const double b_count = static_cast<double>(batch.size());
  b_mean /= b_count;
  double b_var = 0.0;
  for (double x : batch) b_var += (x - b_mean) * (x - b_mean);
  b_var /= b_count;

  const double delta = b_mean - mean;
  const double total = count + b_count;
  const double m2 = var * count + b_var * b_count + delta * delta * count * b_count / total;
  mean += delta * b_count / total;
  var = m2 / total;
  count = total;
}

RewardScaler::RewardScaler(std::size_t n_envs, double gamma)
    : gamma_(gamma), returns_(n_envs, 0.0), pending_reset_(n_envs, 0) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("reward scaler gamma must lie in [0, 1]");
}

std::vector<double> RewardScaler::normalize(std::span<const double> rewards, std::span<const std::uint8_t> dones) {
  if (rewards.size() != returns_.size() || dones.size() != returns_.size()) {
    throw ConfigError("reward scaler expects one reward and done flag per env");
  }
  for (std::size_t e = 0; e < returns_.size(); ++e) {
    const double keep = pending_reset_[e] != 0 ? 0.0 : 1.0;
    returns_[e] = gamma_ * returns_[e] * keep + rewards[e];
    pending_reset_[e] = dones[e];
  }
  stats_.update(returns_);
  const double s = scale();
  std::vector<double> out(rewards.size());
  for (std::size_t e = 0; e < rewards.size(); ++e) out[e] = rewards[e] / s;
  return out;
}

double RewardScaler::scale() const { return std::max(std::sqrt(stats_.var), 1e-8); }

}  // namespace reinflow::rlcore
