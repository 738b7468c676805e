#pragma once

#include <cstddef>
#include <functional>

#include "reinflow/flowmatch/dataset.hpp"
#include "reinflow/flowmatch/losses.hpp"
#include "reinflow/flowmatch/schemes.hpp"
#include "reinflow/numerics/optim.hpp"

namespace reinflow::flowmatch {

struct PretrainConfig {
  std::size_t steps = 4000;
  std::size_t batch_size = 256;
  numerics::LrSchedule lr{1e-3, 1e-4, 0, 4000, numerics::LrScheduleKind::CosineWarmRestart};
  double weight_decay = 0.0;
  TimeSampler time_sampler;
  ShortcutConfig shortcut;
};

// Behaviour cloning by minibatch Adam on the rectified-flow loss, or on the
// shortcut loss when the field is a shortcut model. Each minibatch draws fresh
// x0 ~ N(0, I). `on_step(step, loss)` is called after every update.
void pretrain(VelocityField& field, const FlowDataset& data, const PretrainConfig& config, numerics::SeededRng& rng,
              const std::function<void(std::size_t, double)>& on_step = {});

// Draw a minibatch (rows sampled with replacement) with fresh noise and times.
FlowBatch sample_flow_batch(const FlowDataset& data, std::size_t batch_size, const TimeSampler& sampler,
                            numerics::SeededRng& rng);

}  // namespace reinflow::flowmatch
