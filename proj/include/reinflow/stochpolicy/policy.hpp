#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "reinflow/flowmatch/schemes.hpp"
#include "reinflow/flowmatch/velocity_field.hpp"

namespace reinflow::stochpolicy {

using numerics::Matrix;
using numerics::MlpParams;
using numerics::Vector;

// Which inputs reach the noise head. Constant ignores every input and learns
// one raw value per coordinate (the bias of a zero-input layer).
enum class NoiseConditioning { ObsOnly, ObsAndTime, Constant };

const char* to_string(NoiseConditioning c);
NoiseConditioning noise_conditioning_from_string(const std::string& name);

struct NoiseHeadConfig {
  double sigma_min = 0.10;
  double sigma_max = 0.24;
  NoiseConditioning conditioning = NoiseConditioning::ObsAndTime;
  std::vector<std::size_t> hidden = {32};
  numerics::Activation activation = numerics::Activation::Mish;
};

// Emits per-coordinate standard deviations
// sigma = sigma_min + (sigma_max_current - sigma_min) * (tanh(u) + 1) / 2.
struct NoiseHead {
  MlpParams net;
  double sigma_min = 0.10;
  double sigma_max = 0.24;
  NoiseConditioning conditioning = NoiseConditioning::ObsAndTime;
  std::size_t time_embed_dim = 16;

  static NoiseHead create(const NoiseHeadConfig& config, std::size_t chunk_dim, std::size_t cond_dim,
                          std::size_t time_embed_dim, numerics::SeededRng& rng);
  static std::size_t input_width(NoiseConditioning c, std::size_t cond_dim, std::size_t time_embed_dim);

  Matrix assemble(const Matrix& obs, std::span<const double> t) const;
};

// Velocity field plus noise-injection head: theta-bar = [theta, theta'].
struct NoisyFlowPolicy {
  flowmatch::VelocityField velocity;
  NoiseHead noise;
  flowmatch::DiscretizationScheme scheme;
  double clip_bound = 1.0;
  double sigma_max_current = 0.24;

  static NoisyFlowPolicy create(flowmatch::VelocityField velocity, const NoiseHeadConfig& noise_config,
                                flowmatch::DiscretizationScheme scheme, double clip_bound, numerics::SeededRng& rng);

  std::size_t chunk_dim() const { return velocity.chunk_dim(); }
  std::size_t cond_dim() const { return velocity.cond_dim(); }
  std::size_t steps() const { return scheme.steps(); }

  void validate() const;
};

// Gradient buffers matching [theta, theta'].
struct PolicyGrads {
  MlpParams velocity;
  MlpParams noise;

  static PolicyGrads zeros_like(const NoisyFlowPolicy& policy);
  std::vector<double> flatten() const;
  void add_scaled(const PolicyGrads& other, double scale);
};

// Flat view of [theta, theta'] in declaration order (velocity, then noise).
std::vector<double> flatten_params(const NoisyFlowPolicy& policy);
void assign_params(NoisyFlowPolicy& policy, std::span<const double> flat);

struct SigmaForward {
  Matrix sigma;   // B x chunk_dim
  Matrix raw;     // head output u
  numerics::MlpTape tape;
};

// Batched sigma_theta'(t, a, obs). `a` is accepted for interface symmetry
// with the velocity field; none of the conditioning modes reads it.
SigmaForward sigma_forward_batch(const NoisyFlowPolicy& policy, std::span<const double> t, const Matrix& a,
                                 const Matrix& obs);
Vector sigma_forward(const NoisyFlowPolicy& policy, double t, const Vector& a, const Vector& obs);
// dL/dsigma -> dL/du, then through the head.
void sigma_backward(const NoisyFlowPolicy& policy, const SigmaForward& fwd, const Matrix& grad_sigma, MlpParams& grads);

// Noise-free Euler integration from a0 = 0 with per-step clipping to
// +-clip_bound. Consumes no randomness.
Vector act_deterministic(const NoisyFlowPolicy& policy, const Vector& obs);
Matrix act_deterministic_batch(const NoisyFlowPolicy& policy, const Matrix& obs);

// Noise-free clipped integration from a given a0.
Matrix integrate_clipped(const NoisyFlowPolicy& policy, const Matrix& a0, const Matrix& obs);

}  // namespace reinflow::stochpolicy
