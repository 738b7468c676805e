#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "reinflow/stochpolicy/policy.hpp"

namespace reinflow::stochpolicy {

// a^0 ... a^K for one observation. Rows of `actions` are the stored (clipped)
// intermediate actions; `means`/`sigmas` describe the pre-clip Gaussian of
// each transition.
struct DenoisingChain {
  Matrix actions;  // (K+1) x d
  Matrix means;    // K x d
  Matrix sigmas;   // K x d
  std::vector<double> knots;
  double initial_logprob = 0.0;
  std::vector<double> transition_logprobs;
  double joint_logprob = 0.0;

  std::size_t steps() const { return transition_logprobs.size(); }
  // Sum over transitions; excludes the theta-independent a^0 term.
  double transition_logprob_sum() const;
  Vector final_action() const { return actions.row(actions.rows() - 1).transpose(); }
};

// ln N(y | mean, diag(sigma^2)), summed over coordinates.
double gaussian_logpdf_diag(const Vector& y, const Vector& mean, const Vector& sigma);

// a^0 ~ N(0, I); a^{k+1} = clip(a^k + v dt_k + sigma * eps_k, +-clip_bound).
DenoisingChain sample_chain(const NoisyFlowPolicy& policy, const Vector& obs, numerics::SeededRng& rng);
// Same recursion with caller-supplied a^0 and eps (K x d).
DenoisingChain chain_from_noise(const NoisyFlowPolicy& policy, const Vector& obs, const Vector& a0,
                                const Matrix& eps);
// One chain per observation row; row i draws from rngs[i] in the same order
// as sample_chain.
std::vector<DenoisingChain> sample_chains(const NoisyFlowPolicy& policy, const Matrix& obs,
                                          std::span<numerics::SeededRng> rngs);

struct ChainLogProb {
  double joint = 0.0;
  double initial = 0.0;
  std::vector<double> transitions;
  PolicyGrads grads;  // d joint / d [theta, theta']
};

// Re-evaluates every transition density of a stored chain under the current
// parameters. Chain values are data: gradients flow only through v and sigma.
ChainLogProb chain_logprob(const NoisyFlowPolicy& policy, const DenoisingChain& chain, const Vector& obs);

// Column layout for minibatches: actions[k] holds a^k for every sample.
struct ChainBatch {
  std::vector<Matrix> actions;  // K+1 matrices, B x d
  Matrix obs;                   // B x cond_dim

  std::size_t size() const { return static_cast<std::size_t>(obs.rows()); }
  static ChainBatch gather(std::span<const DenoisingChain> chains, const Matrix& all_obs,
                           std::span<const std::size_t> indices);
};

struct ChainBatchEval {
  std::vector<numerics::MlpTape> velocity_tapes;
  std::vector<SigmaForward> sigma;
  std::vector<Matrix> means;
  Matrix step_logprob;  // B x K
  Vector logprob;       // B, summed over transitions
};

ChainBatchEval evaluate_chains(const NoisyFlowPolicy& policy, const ChainBatch& batch);

// Accumulates sum_i grad_logprob[i] * d logprob_i + sum_k <grad_sigma[k], d sigma_k>
// into `grads`. `grad_sigma` may be null.
void backprop_chains(const NoisyFlowPolicy& policy, const ChainBatch& batch, const ChainBatchEval& eval,
                     const Vector& grad_logprob, const std::vector<Matrix>* grad_sigma, PolicyGrads& grads);

}  // namespace reinflow::stochpolicy
