#include "reinflow/flowmatch/pretrain.hpp"

#include "reinflow/errors.hpp"

namespace reinflow::flowmatch {

FlowBatch sample_flow_batch(const FlowDataset& data, std::size_t batch_size, const TimeSampler& sampler,
                            numerics::SeededRng& rng) {
  if (data.size() == 0) throw ConfigError("cannot sample from an empty dataset");
  const auto b = static_cast<Eigen::Index>(batch_size);
  const auto cd = static_cast<Eigen::Index>(data.chunk_dim());
  const auto od = static_cast<Eigen::Index>(data.cond_dim());
  FlowBatch batch;
  batch.x0.resize(b, cd);
  batch.x1.resize(b, cd);
  batch.cond.resize(b, od);
  batch.t.resize(b);
  for (Eigen::Index r = 0; r < b; ++r) {
    const std::size_t i = rng.index(data.size());
    const auto target = data.target(i);
    const auto cond = data.condition(i);
    for (Eigen::Index j = 0; j < cd; ++j) batch.x1(r, j) = target[static_cast<std::size_t>(j)];
    for (Eigen::Index j = 0; j < od; ++j) batch.cond(r, j) = cond[static_cast<std::size_t>(j)];
    for (Eigen::Index j = 0; j < cd; ++j) batch.x0(r, j) = rng.normal();
    batch.t(r) = sample_time(sampler, rng);
  }
  return batch;
}

void pretrain(VelocityField& field, const FlowDataset& data, const PretrainConfig& config, numerics::SeededRng& rng,
              const std::function<void(std::size_t, double)>& on_step) {
  if (data.chunk_dim() != field.chunk_dim() || data.cond_dim() != field.cond_dim()) {
    throw ConfigError("dataset dimensions do not match the velocity field");
  }
  if (config.batch_size == 0) throw ConfigError("pretrain batch size must be positive");
  config.time_sampler.validate();
  auto adam = numerics::AdamState::for_params(field.net(), config.weight_decay);
  for (std::size_t step = 0; step < config.steps; ++step) {
    const FlowBatch batch = sample_flow_batch(data, config.batch_size, config.time_sampler, rng);
    const LossResult res =
        field.shortcut() ? shortcut_loss(field, batch, config.shortcut, rng) : reflow_loss(field, batch);
    numerics::adam_update(adam, field.net(), res.grads, numerics::schedule_lr(config.lr, step));
    if (on_step) on_step(step, res.loss);
  }
}

}  // namespace reinflow::flowmatch
