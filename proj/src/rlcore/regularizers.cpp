#include "reinflow/rlcore/regularizers.hpp"

#include <cmath>
#include <numbers>

#include "reinflow/errors.hpp"

namespace reinflow::rlcore {

namespace {

const double kHalfLog2PiE = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);

}  // namespace

void RegularizerConfig::validate() const {
  if (!(entropy_coef >= 0.0) || !std::isfinite(entropy_coef)) throw ConfigError("entropy_coef must be finite and >= 0");
  if (!(w2_coef >= 0.0) || !std::isfinite(w2_coef)) throw ConfigError("w2_coef must be finite and >= 0");
}

EntropyTerm entropy_from_sigmas(const std::vector<stochpolicy::SigmaForward>& sigma, std::size_t chunk_dim) {
  if (sigma.empty()) throw ConfigError("entropy needs at least one transition");
  const double K = static_cast<double>(sigma.size());
  const auto B = sigma.front().sigma.rows();
  if (B == 0) throw ConfigError("entropy needs at least one sample");
  const double scale = -1.0 / ((K + 1.0) * static_cast<double>(B));

  EntropyTerm out;
  double total = static_cast<double>(B) * static_cast<double>(chunk_dim) * kHalfLog2PiE;
  for (const auto& s : sigma) {
    if (!(s.sigma.array() > 0.0).all()) throw NumericError("non-positive sigma in entropy regularizer");
    total += s.sigma.size() * kHalfLog2PiE + s.sigma.array().log().sum();
    out.grad_sigma.push_back((scale * s.sigma.array().inverse()).matrix());
  }
  out.value = scale * total;
  return out;
}

RegularizerResult entropy_regularizer(const stochpolicy::NoisyFlowPolicy& policy,
                                      const stochpolicy::ChainBatch& batch) {
  const std::size_t K = policy.steps();
  if (batch.actions.size() != K + 1) throw ConfigError("chain batch length does not match the discretization");
  std::vector<stochpolicy::SigmaForward> sigma;
  sigma.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double t[] = {policy.scheme.t(k)};
    sigma.push_back(stochpolicy::sigma_forward_batch(policy, t, batch.actions[k], batch.obs));
  }
  const EntropyTerm term = entropy_from_sigmas(sigma, policy.chunk_dim());
  RegularizerResult out{term.value, stochpolicy::PolicyGrads::zeros_like(policy)};
  for (std::size_t k = 0; k < K; ++k) {
    stochpolicy::sigma_backward(policy, sigma[k], term.grad_sigma[k], out.grads.noise);
  }
  return out;
}

RegularizerResult w2_regularizer(const stochpolicy::NoisyFlowPolicy& policy,
                                 const stochpolicy::NoisyFlowPolicy& frozen_ref, const Matrix& obs,
                                 numerics::SeededRng& rng) {
  Matrix a0(obs.rows(), static_cast<Eigen::Index>(policy.chunk_dim()));
  for (Eigen::Index i = 0; i < a0.rows(); ++i) {
    for (Eigen::Index j = 0; j < a0.cols(); ++j) a0(i, j) = rng.normal();
  }
  return w2_regularizer_from_noise(policy, frozen_ref, obs, a0);
}

RegularizerResult w2_regularizer_from_noise(const stochpolicy::NoisyFlowPolicy& policy,
                                            const stochpolicy::NoisyFlowPolicy& frozen_ref, const Matrix& obs,
                                            const Matrix& a0) {
  if (policy.chunk_dim() != frozen_ref.chunk_dim() || policy.cond_dim() != frozen_ref.cond_dim() ||
      policy.steps() != frozen_ref.steps()) {
    throw ConfigError("W2 regularizer: policy and reference dimensions differ");
  }
  if (a0.rows() != obs.rows() || static_cast<std::size_t>(a0.cols()) != policy.chunk_dim()) {
    throw ConfigError("W2 regularizer: a0 shape mismatch");
  }
  if (obs.rows() == 0) throw ConfigError("W2 regularizer needs at least one observation");

  const Matrix a_ref = stochpolicy::integrate_clipped(frozen_ref, a0, obs);

  const std::size_t K = policy.steps();
  const double bound = policy.clip_bound;
  std::vector<numerics::MlpTape> tapes;
  std::vector<Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>> inside;
  tapes.reserve(K);
  inside.reserve(K);
  Matrix a = a0;
  for (std::size_t k = 0; k < K; ++k) {
    const double t[] = {policy.scheme.t(k)};
    const double dt[] = {policy.scheme.dt(k)};
    auto fwd = policy.velocity.forward(a, obs, t, dt);
    const Matrix pre = a + dt[0] * fwd.output;
    inside.push_back(pre.array().abs() <= bound);
    a = pre.cwiseMax(-bound).cwiseMin(bound);
    tapes.push_back(std::move(fwd.tape));
  }
  if (!a.allFinite()) throw NumericError("non-finite action in W2 regularizer");

  const double n = static_cast<double>(obs.rows());
  const Matrix diff = a - a_ref;
  RegularizerResult out{0.5 * diff.squaredNorm() / n, stochpolicy::PolicyGrads::zeros_like(policy)};

  const auto d = static_cast<Eigen::Index>(policy.chunk_dim());
  Matrix g = diff / n;  // dR / da^K
  for (std::size_t k = K; k-- > 0;) {
    const double dt = policy.scheme.dt(k);
    const Matrix g_pre = inside[k].select(g, Matrix::Zero(g.rows(), g.cols()));
    const Matrix g_in = numerics::mlp_backward(policy.velocity.net(), tapes[k], dt * g_pre, out.grads.velocity);
    g = g_pre + g_in.leftCols(d);
  }
  return out;
}

}  // namespace reinflow::rlcore
