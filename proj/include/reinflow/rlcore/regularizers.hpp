#pragma once

#include <cstddef>
#include <vector>

#include "reinflow/stochpolicy/chain.hpp"

namespace reinflow::rlcore {

using numerics::Matrix;
using numerics::Vector;

struct RegularizerConfig {
  double entropy_coef = 0.03;
  double w2_coef = 0.0;
  // Observations per minibatch used for the W2 term; 0 uses the whole minibatch.
  std::size_t w2_samples = 0;

  void validate() const;
};

struct RegularizerResult {
  double value = 0.0;
  stochpolicy::PolicyGrads grads;
};

struct EntropyTerm {
  double value = 0.0;
  std::vector<Matrix> grad_sigma;  // d value / d sigma_k, one B x d matrix per transition
};

// Negative per-symbol entropy rate of the chain,
// R_h = -1/(K+1) mean_i [h(N(0, I_d)) + sum_k sum_j 1/2 ln(2 pi e sigma_kj^2)],
// from already evaluated noise-head outputs.
EntropyTerm entropy_from_sigmas(const std::vector<stochpolicy::SigmaForward>& sigma, std::size_t chunk_dim);

RegularizerResult entropy_regularizer(const stochpolicy::NoisyFlowPolicy& policy, const stochpolicy::ChainBatch& batch);

// mean_i 1/2 |a_i - a_old_i|^2 where both actions are integrated noise-free
// (with clipping) from the same a^0. Gradients flow through `policy` only.
RegularizerResult w2_regularizer(const stochpolicy::NoisyFlowPolicy& policy,
                                 const stochpolicy::NoisyFlowPolicy& frozen_ref, const Matrix& obs,
                                 numerics::SeededRng& rng);
RegularizerResult w2_regularizer_from_noise(const stochpolicy::NoisyFlowPolicy& policy,
                                            const stochpolicy::NoisyFlowPolicy& frozen_ref, const Matrix& obs,
                                            const Matrix& a0);

}  // namespace reinflow::rlcore
