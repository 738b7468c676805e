#include "reinflow/stochpolicy/chain.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "reinflow/errors.hpp"
#include "reinflow/flowmatch/sampling.hpp"

namespace reinflow::stochpolicy {
namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

// Row-wise Gaussian log-densities of y under N(mean, diag(sigma^2)).
Vector rowwise_logpdf(const Matrix& y, const Matrix& mean, const Matrix& sigma) {
  const auto z = ((y - mean).array() / sigma.array());
  return (-0.5 * z.square() - sigma.array().log() - kHalfLog2Pi).rowwise().sum();
}

void check_sigma(const Matrix& sigma, std::size_t k) {
  if (!(sigma.array() > 0.0).all() || !sigma.allFinite()) {
    throw NumericError("noise standard deviation must be positive and finite", static_cast<long>(k));
  }
}

// Shared recursion for sampling: rows are independent chains.
struct BatchChains {
  std::vector<Matrix> actions;
  std::vector<Matrix> means;
  std::vector<Matrix> sigmas;
};

BatchChains run_chains(const NoisyFlowPolicy& policy, const Matrix& obs, const Matrix& a0,
                       const std::vector<Matrix>& eps) {
  policy.validate();
  BatchChains out;
  out.actions.push_back(a0);
  const double bound = policy.clip_bound;
  for (std::size_t k = 0; k < policy.steps(); ++k) {
    const Matrix& a = out.actions.back();
    const double t[] = {policy.scheme.t(k)};
    const double dt[] = {policy.scheme.dt(k)};
    Matrix v;
    SigmaForward sig;
    try {
      v = policy.velocity.evaluate(a, obs, t, dt);
      sig = sigma_forward_batch(policy, t, a, obs);
    } catch (const NumericError&) {
      throw NumericError("non-finite network output while sampling a chain", static_cast<long>(k));
    }
    Matrix mean = a + dt[0] * v;
    Matrix next = (mean.array() + sig.sigma.array() * eps[k].array()).matrix().cwiseMax(-bound).cwiseMin(bound);
    if (!next.allFinite()) throw NumericError("non-finite action while sampling a chain", static_cast<long>(k));
    out.means.push_back(std::move(mean));
    out.sigmas.push_back(std::move(sig.sigma));
    out.actions.push_back(std::move(next));
  }
  return out;
}

DenoisingChain extract(const NoisyFlowPolicy& policy, const BatchChains& b, Eigen::Index row) {
  const std::size_t K = policy.steps();
  const auto d = static_cast<Eigen::Index>(policy.chunk_dim());
  DenoisingChain c;
  c.actions.resize(static_cast<Eigen::Index>(K + 1), d);
  c.means.resize(static_cast<Eigen::Index>(K), d);
  c.sigmas.resize(static_cast<Eigen::Index>(K), d);
  for (std::size_t k = 0; k <= K; ++k) c.actions.row(static_cast<Eigen::Index>(k)) = b.actions[k].row(row);
  for (std::size_t k = 0; k < K; ++k) {
    c.means.row(static_cast<Eigen::Index>(k)) = b.means[k].row(row);
    c.sigmas.row(static_cast<Eigen::Index>(k)) = b.sigmas[k].row(row);
  }
  c.knots = policy.scheme.knots();
  c.initial_logprob = flowmatch::standard_normal_logpdf(c.actions.row(0).transpose());
  c.transition_logprobs.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    check_sigma(c.sigmas.row(kk), k);
    c.transition_logprobs[k] = gaussian_logpdf_diag(c.actions.row(kk + 1).transpose(), c.means.row(kk).transpose(),
                                                    c.sigmas.row(kk).transpose());
  }
  c.joint_logprob = c.initial_logprob + c.transition_logprob_sum();
  return c;
}

}  // namespace

double DenoisingChain::transition_logprob_sum() const {
  return std::accumulate(transition_logprobs.begin(), transition_logprobs.end(), 0.0);
}

double gaussian_logpdf_diag(const Vector& y, const Vector& mean, const Vector& sigma) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    const double z = (y(j) - mean(j)) / sigma(j);
    total += -0.5 * z * z - std::log(sigma(j)) - kHalfLog2Pi;
  }
  return total;
}

DenoisingChain chain_from_noise(const NoisyFlowPolicy& policy, const Vector& obs, const Vector& a0,
                                const Matrix& eps) {
  const auto d = static_cast<Eigen::Index>(policy.chunk_dim());
  if (a0.size() != d || eps.cols() != d || eps.rows() != static_cast<Eigen::Index>(policy.steps())) {
    throw ConfigError("chain noise shape mismatch");
  }
  std::vector<Matrix> per_step;
  for (Eigen::Index k = 0; k < eps.rows(); ++k) per_step.emplace_back(eps.row(k));
  const auto b = run_chains(policy, flowmatch::as_row(obs), flowmatch::as_row(a0), per_step);
  return extract(policy, b, 0);
}

DenoisingChain sample_chain(const NoisyFlowPolicy& policy, const Vector& obs, numerics::SeededRng& rng) {
  const auto d = static_cast<Eigen::Index>(policy.chunk_dim());
  Vector a0(d);
  rng.fill_normal({a0.data(), static_cast<std::size_t>(d)});
  Matrix eps(static_cast<Eigen::Index>(policy.steps()), d);
  rng.fill_normal({eps.data(), static_cast<std::size_t>(eps.size())});
  return chain_from_noise(policy, obs, a0, eps);
}

std::vector<DenoisingChain> sample_chains(const NoisyFlowPolicy& policy, const Matrix& obs,
                                          std::span<numerics::SeededRng> rngs) {
  const Eigen::Index n = obs.rows();
  if (rngs.size() != static_cast<std::size_t>(n)) throw ConfigError("need one rng stream per observation row");
  const auto d = static_cast<Eigen::Index>(policy.chunk_dim());
  const std::size_t K = policy.steps();
  Matrix a0(n, d);
  std::vector<Matrix> eps(K, Matrix(n, d));
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& rng = rngs[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < d; ++j) a0(i, j) = rng.normal();
    for (std::size_t k = 0; k < K; ++k) {
      for (Eigen::Index j = 0; j < d; ++j) eps[k](i, j) = rng.normal();
    }
  }
  const auto b = run_chains(policy, obs, a0, eps);
  std::vector<DenoisingChain> chains;
  chains.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) chains.push_back(extract(policy, b, i));
  return chains;
}

ChainBatch ChainBatch::gather(std::span<const DenoisingChain> chains, const Matrix& all_obs,
                              std::span<const std::size_t> indices) {
  ChainBatch batch;
  if (chains.empty()) return batch;
  const auto n = static_cast<Eigen::Index>(indices.size());
  const Eigen::Index K1 = chains.front().actions.rows();
  const Eigen::Index d = chains.front().actions.cols();
  batch.actions.assign(static_cast<std::size_t>(K1), Matrix(n, d));
  batch.obs.resize(n, all_obs.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t src = indices[static_cast<std::size_t>(i)];
    const DenoisingChain& c = chains[src];
    for (Eigen::Index k = 0; k < K1; ++k) batch.actions[static_cast<std::size_t>(k)].row(i) = c.actions.row(k);
    batch.obs.row(i) = all_obs.row(static_cast<Eigen::Index>(src));
  }
  return batch;
}

ChainBatchEval evaluate_chains(const NoisyFlowPolicy& policy, const ChainBatch& batch) {
  const std::size_t K = policy.steps();
  if (batch.actions.size() != K + 1) throw ConfigError("chain length does not match the discretization");
  const auto n = static_cast<Eigen::Index>(batch.size());
  ChainBatchEval ev;
  ev.step_logprob.resize(n, static_cast<Eigen::Index>(K));
  for (std::size_t k = 0; k < K; ++k) {
    const Matrix& a = batch.actions[k];
    const double t[] = {policy.scheme.t(k)};
    const double dt[] = {policy.scheme.dt(k)};
    auto vf = policy.velocity.forward(a, batch.obs, t, dt);
    auto sig = sigma_forward_batch(policy, t, a, batch.obs);
    check_sigma(sig.sigma, k);
    Matrix mean = a + dt[0] * vf.output;
    ev.step_logprob.col(static_cast<Eigen::Index>(k)) = rowwise_logpdf(batch.actions[k + 1], mean, sig.sigma);
    ev.velocity_tapes.push_back(std::move(vf.tape));
    ev.sigma.push_back(std::move(sig));
    ev.means.push_back(std::move(mean));
  }
  ev.logprob = ev.step_logprob.rowwise().sum();
  return ev;
}

void backprop_chains(const NoisyFlowPolicy& policy, const ChainBatch& batch, const ChainBatchEval& eval,
                     const Vector& grad_logprob, const std::vector<Matrix>* grad_sigma, PolicyGrads& grads) {
  const std::size_t K = policy.steps();
  for (std::size_t k = 0; k < K; ++k) {
    const double dt = policy.scheme.dt(k);
    const Matrix& sigma = eval.sigma[k].sigma;
    const Matrix diff = batch.actions[k + 1] - eval.means[k];
    const Matrix inv_var = sigma.array().square().inverse().matrix();
    // d logN / d mean = diff / sigma^2 ; mean = a + v dt
    Matrix grad_v = (diff.array() * inv_var.array()).matrix();
    grad_v = (grad_v.array().colwise() * (dt * grad_logprob).array()).matrix();
    // d logN / d sigma = -1/sigma + diff^2 / sigma^3
    Matrix grad_s = ((diff.array().square() * inv_var.array() - 1.0) / sigma.array()).matrix();
    grad_s = (grad_s.array().colwise() * grad_logprob.array()).matrix();
    if (grad_sigma != nullptr) grad_s += (*grad_sigma)[k];
    numerics::mlp_backward(policy.velocity.net(), eval.velocity_tapes[k], grad_v, grads.velocity);
    sigma_backward(policy, eval.sigma[k], grad_s, grads.noise);
  }
}

ChainLogProb chain_logprob(const NoisyFlowPolicy& policy, const DenoisingChain& chain, const Vector& obs) {
  if (static_cast<std::size_t>(chain.actions.rows()) != policy.steps() + 1) {
    throw ConfigError("chain length does not match the discretization");
  }
  const DenoisingChain* one = &chain;
  const Matrix obs_row = flowmatch::as_row(obs);
  const std::size_t idx[] = {0};
  const ChainBatch batch = ChainBatch::gather({one, 1}, obs_row, idx);
  const ChainBatchEval ev = evaluate_chains(policy, batch);
  ChainLogProb out;
  out.initial = flowmatch::standard_normal_logpdf(chain.actions.row(0).transpose());
  out.transitions.assign(ev.step_logprob.data(), ev.step_logprob.data() + ev.step_logprob.size());
  out.joint = out.initial + ev.logprob(0);
  out.grads = PolicyGrads::zeros_like(policy);
  backprop_chains(policy, batch, ev, Vector::Ones(1), nullptr, out.grads);
  return out;
}

}  // namespace reinflow::stochpolicy
