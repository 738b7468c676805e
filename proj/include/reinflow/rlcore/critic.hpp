#pragma once

#include <cstddef>
#include <vector>

#include "reinflow/numerics/mlp.hpp"
#include "reinflow/numerics/rng.hpp"

namespace reinflow::rlcore {

using numerics::Matrix;
using numerics::MlpParams;
using numerics::Vector;

struct CriticConfig {
  std::vector<std::size_t> hidden = {64, 64};
  numerics::Activation activation = numerics::Activation::Mish;
  double output_bias = 0.0;
};

// Observation -> scalar value.
struct Critic {
  MlpParams net;

  static Critic create(const CriticConfig& config, std::size_t obs_dim, numerics::SeededRng& rng);
  std::size_t obs_dim() const { return net.input_dim(); }
  Vector values(const Matrix& obs) const;
};

struct CriticLossResult {
  double loss = 0.0;
  MlpParams grads;
};

// coef * 1/2 * mean((V(o) - R)^2).
CriticLossResult critic_loss(const Critic& critic, const Matrix& obs, const Vector& returns, double coef);

}  // namespace reinflow::rlcore
