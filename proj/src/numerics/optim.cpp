#include "reinflow/numerics/optim.hpp"

#include <cmath>
#include <numbers>

#include "reinflow/errors.hpp"

namespace reinflow::numerics {

AdamState AdamState::for_size(std::size_t n, double weight_decay) {
  AdamState s;
  s.first_moment.assign(n, 0.0);
  s.second_moment.assign(n, 0.0);
  s.weight_decay = weight_decay;
  return s;
}

AdamState AdamState::for_params(std::span<const MlpParams* const> nets, double weight_decay) {
  std::size_t n = 0;
  for (const MlpParams* p : nets) n += p->param_count();
  return for_size(n, weight_decay);
}

AdamState AdamState::for_params(const MlpParams& net, double weight_decay) {
  return for_size(net.param_count(), weight_decay);
}

namespace {

struct AdamStep {
  double lr;
  double correction1;
  double correction2;
};

AdamStep begin_step(AdamState& state, double lr) {
  if (!(lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
  ++state.step;
  const double t = static_cast<double>(state.step);
  return {lr, 1.0 - std::pow(state.beta1, t), 1.0 - std::pow(state.beta2, t)};
}

void apply(AdamState& s, const AdamStep& st, std::size_t offset, std::span<double> p, std::span<const double> g) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double grad = g[i] + s.weight_decay * p[i];
    double& m = s.first_moment[offset + i];
    double& v = s.second_moment[offset + i];
    m = s.beta1 * m + (1.0 - s.beta1) * grad;
    v = s.beta2 * v + (1.0 - s.beta2) * grad * grad;
    const double m_hat = m / st.correction1;
    const double v_hat = v / st.correction2;
    p[i] -= st.lr * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
}

}  // namespace

void adam_update(AdamState& state, std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      state.second_moment.size() != params.size()) {
    throw ConfigError("adam_update: shape mismatch");
  }
  const AdamStep st = begin_step(state, lr);
  apply(state, st, 0, params, grads);
}

void adam_update(AdamState& state, std::span<MlpParams* const> nets, std::span<const MlpParams* const> grads,
                 double lr) {
  if (nets.size() != grads.size()) throw ConfigError("adam_update: network/gradient count mismatch");
  std::size_t total = 0;
  for (std::size_t i = 0; i < nets.size(); ++i) {
    if (!nets[i]->same_shape(*grads[i])) throw ConfigError("adam_update: shape mismatch");
    total += nets[i]->param_count();
  }
  if (total != state.first_moment.size() || total != state.second_moment.size()) {
    throw ConfigError("adam_update: optimizer state does not match parameters");
  }
  const AdamStep st = begin_step(state, lr);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < nets.size(); ++i) {
    MlpParams& net = *nets[i];
    const MlpParams& g = *grads[i];
    for (std::size_t l = 0; l < net.layers(); ++l) {
      const auto nw = static_cast<std::size_t>(net.weights[l].size());
      apply(state, st, offset, {net.weights[l].data(), nw}, {g.weights[l].data(), nw});
      offset += nw;
      const auto nb = static_cast<std::size_t>(net.biases[l].size());
      apply(state, st, offset, {net.biases[l].data(), nb}, {g.biases[l].data(), nb});
      offset += nb;
    }
  }
}

void adam_update(AdamState& state, MlpParams& params, const MlpParams& grads, double lr) {
  MlpParams* nets[] = {&params};
  const MlpParams* gs[] = {&grads};
  adam_update(state, nets, gs, lr);
}

double schedule_lr(const LrSchedule& s, std::size_t iter) {
  if (s.kind == LrScheduleKind::Constant) return s.base;
  if (iter < s.warmup) {
    return s.base * static_cast<double>(iter) / static_cast<double>(s.warmup);
  }
  const std::size_t cycle = s.cycle == 0 ? 1 : s.cycle;
  const double pos = static_cast<double>((iter - s.warmup) % cycle) / static_cast<double>(cycle);
  return s.final + 0.5 * (s.base - s.final) * (1.0 + std::cos(std::numbers::pi * pos));
}

}  // namespace reinflow::numerics
