#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "reinflow/numerics/mlp.hpp"

namespace reinflow::numerics {

// Adam with bias correction and optional L2 weight decay (added to the
// gradient). One state may drive several networks updated together; the
// moments follow the concatenated declaration order of those networks.
struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;

  static AdamState for_size(std::size_t n, double weight_decay = 0.0);
  static AdamState for_params(std::span<const MlpParams* const> nets, double weight_decay = 0.0);
  static AdamState for_params(const MlpParams& net, double weight_decay = 0.0);
};

// Flat-vector update.
void adam_update(AdamState& state, std::span<double> params, std::span<const double> grads, double lr);
// Update every network in `nets` with the matching entry of `grads`.
void adam_update(AdamState& state, std::span<MlpParams* const> nets, std::span<const MlpParams* const> grads, double lr);
void adam_update(AdamState& state, MlpParams& params, const MlpParams& grads, double lr);

enum class LrScheduleKind { Constant, CosineWarmRestart };

// Linear warmup 0 -> base over `warmup` iterations, then cosine decay
// base -> final over every `cycle` iterations, restarting at base.
struct LrSchedule {
  double base = 1e-3;
  double final = 1e-3;
  std::size_t warmup = 0;
  std::size_t cycle = 100;
  LrScheduleKind kind = LrScheduleKind::CosineWarmRestart;
};

double schedule_lr(const LrSchedule& schedule, std::size_t iter);

}  // namespace reinflow::numerics
