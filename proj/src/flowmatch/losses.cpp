#include "reinflow/flowmatch/losses.hpp"

#include <cmath>
#include <vector>

#include "reinflow/errors.hpp"

namespace reinflow::flowmatch {
namespace {

void check_batch(const VelocityField& field, const FlowBatch& b) {
  if (b.size() == 0) throw ConfigError("empty flow batch");
  if (b.x1.rows() != b.x0.rows() || b.t.size() != b.x0.rows() ||
      static_cast<std::size_t>(b.x0.cols()) != field.chunk_dim() || b.x1.cols() != b.x0.cols()) {
    throw ConfigError("flow batch shape mismatch");
  }
}

Matrix interpolate(const FlowBatch& b) {
  Matrix xt = b.x0;
  for (Eigen::Index r = 0; r < xt.rows(); ++r) {
    xt.row(r) = b.t(r) * b.x1.row(r) + (1.0 - b.t(r)) * b.x0.row(r);
  }
  return xt;
}

std::span<const double> span_of(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

LossResult reflow_loss(const VelocityField& field, const FlowBatch& batch) {
  check_batch(field, batch);
  const Matrix xt = interpolate(batch);
  const std::vector<double> zero_step(1, 0.0);
  auto fwd = field.forward(xt, batch.cond, span_of(batch.t), zero_step);
  const Matrix residual = batch.x1 - batch.x0 - fwd.output;
  const double n = static_cast<double>(batch.size());
  LossResult res;
  res.loss = residual.squaredNorm() / n;
  if (!std::isfinite(res.loss)) throw NumericError("non-finite rectified-flow loss");
  res.flow_term = res.loss;
  res.grads = field.net().zeros_like();
  numerics::mlp_backward(field.net(), fwd.tape, (-2.0 / n) * residual, res.grads);
  return res;
}

ShortcutPlan plan_shortcut(const FlowBatch& batch, const ShortcutConfig& config, numerics::SeededRng& rng) {
  if (config.max_steps < 2 || (config.max_steps & (config.max_steps - 1)) != 0) {
    throw ConfigError("shortcut max_steps must be a power of two >= 2");
  }
  if (!(config.consistency_fraction >= 0.0 && config.consistency_fraction < 1.0)) {
    throw ConfigError("shortcut consistency fraction must lie in [0, 1)");
  }
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto n_sc = static_cast<Eigen::Index>(std::floor(config.consistency_fraction * static_cast<double>(n)));
  const Eigen::Index n_fm = n - n_sc;

  ShortcutPlan plan;
  plan.flow.x0 = batch.x0.topRows(n_fm);
  plan.flow.x1 = batch.x1.topRows(n_fm);
  plan.flow.cond = batch.cond.cols() > 0 ? Matrix(batch.cond.topRows(n_fm)) : Matrix(n_fm, 0);
  plan.flow.t = batch.t.head(n_fm);

  std::size_t levels = 0;
  for (std::size_t m = config.max_steps; m > 1; m >>= 1) ++levels;  // log2(max_steps)
  plan.sc_xt.resize(n_sc, batch.x0.cols());
  plan.sc_cond = batch.cond.cols() > 0 ? Matrix(batch.cond.bottomRows(n_sc)) : Matrix(n_sc, 0);
  plan.sc_t.resize(n_sc);
  plan.sc_step.resize(n_sc);
  for (Eigen::Index i = 0; i < n_sc; ++i) {
    // step d in {1/max_steps, ..., 1/2} so that the doubled step 2d <= 1
    const std::size_t j = rng.index(levels);
    const double d = static_cast<double>(std::size_t{1} << j) / static_cast<double>(config.max_steps);
    const auto grid = static_cast<std::size_t>(std::llround(1.0 / d));
    const double t = d * static_cast<double>(rng.index(grid - 1));  // t + 2d <= 1
    const Eigen::Index r = n_fm + i;
    plan.sc_xt.row(i) = t * batch.x1.row(r) + (1.0 - t) * batch.x0.row(r);
    plan.sc_t(i) = t;
    plan.sc_step(i) = d;
  }
  return plan;
}

Matrix shortcut_targets(const VelocityField& field, const ShortcutPlan& plan) {
  if (plan.sc_xt.rows() == 0) return Matrix(0, static_cast<Eigen::Index>(field.chunk_dim()));
  const Matrix first = field.evaluate(plan.sc_xt, plan.sc_cond, span_of(plan.sc_t), span_of(plan.sc_step));
  Matrix x_mid = plan.sc_xt;
  for (Eigen::Index r = 0; r < x_mid.rows(); ++r) x_mid.row(r) += plan.sc_step(r) * first.row(r);
  const Vector t_mid = plan.sc_t + plan.sc_step;
  const Matrix second = field.evaluate(x_mid, plan.sc_cond, span_of(t_mid), span_of(plan.sc_step));
  return 0.5 * (first + second);
}

LossResult shortcut_loss(const VelocityField& field, const ShortcutPlan& plan) {
  return shortcut_loss(field, plan, plan.sc_xt.rows() > 0 ? shortcut_targets(field, plan) : Matrix());
}

LossResult shortcut_loss(const VelocityField& field, const ShortcutPlan& plan, const Matrix& target) {
  if (!field.shortcut()) throw ConfigError("shortcut loss requires a shortcut velocity field");
  const double n = static_cast<double>(plan.total());
  if (plan.total() == 0) throw ConfigError("empty flow batch");
  LossResult res;
  res.grads = field.net().zeros_like();

  if (plan.flow.size() > 0) {
    check_batch(field, plan.flow);
    const Matrix xt = interpolate(plan.flow);
    const std::vector<double> zero_step(1, 0.0);
    auto fwd = field.forward(xt, plan.flow.cond, span_of(plan.flow.t), zero_step);
    const Matrix residual = plan.flow.x1 - plan.flow.x0 - fwd.output;
    res.flow_term = residual.squaredNorm() / n;
    numerics::mlp_backward(field.net(), fwd.tape, (-2.0 / n) * residual, res.grads);
  }
  if (plan.sc_xt.rows() > 0) {
    if (target.rows() != plan.sc_xt.rows() || target.cols() != plan.sc_xt.cols()) {
      throw ConfigError("shortcut targets do not match the plan");
    }
    const Vector doubled = 2.0 * plan.sc_step;
    auto fwd = field.forward(plan.sc_xt, plan.sc_cond, span_of(plan.sc_t), span_of(doubled));
    const Matrix residual = fwd.output - target;
    res.consistency_term = residual.squaredNorm() / n;
    numerics::mlp_backward(field.net(), fwd.tape, (2.0 / n) * residual, res.grads);
  }
  res.loss = res.flow_term + res.consistency_term;
  if (!std::isfinite(res.loss)) throw NumericError("non-finite shortcut loss");
  return res;
}

LossResult shortcut_loss(const VelocityField& field, const FlowBatch& batch, const ShortcutConfig& config,
                         numerics::SeededRng& rng) {
  if (!field.shortcut()) throw ConfigError("shortcut loss requires a shortcut velocity field");
  check_batch(field, batch);
  return shortcut_loss(field, plan_shortcut(batch, config, rng));
}

}  // namespace reinflow::flowmatch
