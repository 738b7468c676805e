#pragma once

#include <cstddef>

#include "reinflow/flowmatch/velocity_field.hpp"
#include "reinflow/numerics/rng.hpp"

namespace reinflow::flowmatch {

// One row per sample: noise x0, target x1, condition, time t.
struct FlowBatch {
  Matrix x0;
  Matrix x1;
  Matrix cond;
  Vector t;

  std::size_t size() const { return static_cast<std::size_t>(x0.rows()); }
};

struct LossResult {
  double loss = 0.0;
  MlpParams grads;
  // Shortcut models split the loss into its two terms; for plain
  // rectified flow flow_term == loss.
  double flow_term = 0.0;
  double consistency_term = 0.0;
};

// mean_i || x1 - x0 - v(t, t*x1 + (1-t)*x0, cond) ||^2
LossResult reflow_loss(const VelocityField& field, const FlowBatch& batch);

struct ShortcutConfig {
  std::size_t max_steps = 8;           // finest step is 1/max_steps (power of two)
  double consistency_fraction = 0.25;  // share of the batch used for self-consistency
};

// Flow-matching rows (step size 0) plus self-consistency rows with their
// re-drawn (t, step) pairs. Fully determines the loss, so gradients can be
// checked against a frozen plan.
struct ShortcutPlan {
  FlowBatch flow;
  Matrix sc_xt;
  Matrix sc_cond;
  Vector sc_t;
  Vector sc_step;

  std::size_t total() const { return flow.size() + static_cast<std::size_t>(sc_xt.rows()); }
};

ShortcutPlan plan_shortcut(const FlowBatch& batch, const ShortcutConfig& config, numerics::SeededRng& rng);

// Two-step target 0.5 * (s(t, x, d) + s(t + d, x + d * s(t, x, d), d)),
// treated as a constant by the loss.
Matrix shortcut_targets(const VelocityField& field, const ShortcutPlan& plan);

LossResult shortcut_loss(const VelocityField& field, const ShortcutPlan& plan);
// Same loss with the self-consistency targets supplied by the caller (held
// fixed, as the stop-gradient prescribes).
LossResult shortcut_loss(const VelocityField& field, const ShortcutPlan& plan, const Matrix& targets);
LossResult shortcut_loss(const VelocityField& field, const FlowBatch& batch, const ShortcutConfig& config,
                         numerics::SeededRng& rng);

}  // namespace reinflow::flowmatch
