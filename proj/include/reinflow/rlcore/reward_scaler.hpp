#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace reinflow::rlcore {

// Streaming mean/variance with a weak prior (mean 0, var 1, count 1e-4),
// merged batch-wise with Chan's parallel update.
struct RunningMeanStd {
  double mean = 0.0;
  double var = 1.0;
  double count = 1e-4;

  void update(std::span<const double> batch);
};

// Scales rewards by the running std of each env's discounted return,
// R_t = gamma * R_{t-1} * (1 - done_{t-1}) + r_t.
class RewardScaler {
 public:
  RewardScaler() = default;
  RewardScaler(std::size_t n_envs, double gamma);

  // One macro-step for every env. `dones` marks episodes that ended at this step;
  // their accumulators restart with the next reward.
  std::vector<double> normalize(std::span<const double> rewards, std::span<const std::uint8_t> dones);

  double scale() const;
  double gamma() const { return gamma_; }
  const std::vector<double>& returns() const { return returns_; }
  const RunningMeanStd& stats() const { return stats_; }

  // Raw state access for checkpointing.
  std::vector<std::uint8_t>& pending_reset() { return pending_reset_; }
  const std::vector<std::uint8_t>& pending_reset() const { return pending_reset_; }
  std::vector<double>& returns_mut() { return returns_; }
  RunningMeanStd& stats_mut() { return stats_; }

 private:
  double gamma_ = 0.99;
  std::vector<double> returns_;
  std::vector<std::uint8_t> pending_reset_;
  RunningMeanStd stats_;
};

}  // namespace reinflow::rlcore
