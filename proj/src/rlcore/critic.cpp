#include "reinflow/rlcore/critic.hpp"

#include "reinflow/errors.hpp"

namespace reinflow::rlcore {

Critic Critic::create(const CriticConfig& config, std::size_t obs_dim, numerics::SeededRng& rng) {
  std::vector<std::size_t> widths;
  widths.push_back(obs_dim);
  widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  widths.push_back(1);
  Critic c{MlpParams::init(widths, config.activation, rng)};
  c.net.biases.back().setConstant(config.output_bias);
  return c;
}

Vector Critic::values(const Matrix& obs) const {
  if (static_cast<std::size_t>(obs.cols()) != obs_dim()) throw ConfigError("critic observation width mismatch");
  return numerics::mlp_eval(net, obs).col(0);
}

CriticLossResult critic_loss(const Critic& critic, const Matrix& obs, const Vector& returns, double coef) {
  if (obs.rows() != returns.size()) throw ConfigError("critic_loss: observation and return counts differ");
  if (obs.rows() == 0) throw ConfigError("critic_loss needs at least one sample");
  const auto fwd = numerics::mlp_apply(critic.net, obs);
  const Vector diff = fwd.output.col(0) - returns;
  const double n = static_cast<double>(returns.size());
  CriticLossResult out;
  out.loss = coef * 0.5 * diff.squaredNorm() / n;
  out.grads = critic.net.zeros_like();
  Matrix grad_out = (coef / n) * diff;
  numerics::mlp_backward(critic.net, fwd.tape, grad_out, out.grads);
  return out;
}

}  // namespace reinflow::rlcore
