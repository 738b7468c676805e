#include "reinflow/stochpolicy/policy.hpp"

#include <cmath>

#include "reinflow/errors.hpp"
#include "reinflow/numerics/embedding.hpp"

namespace reinflow::stochpolicy {

const char* to_string(NoiseConditioning c) {
  switch (c) {
    case NoiseConditioning::ObsOnly:
      return "obs";
    case NoiseConditioning::ObsAndTime:
      return "obs_time";
    case NoiseConditioning::Constant:
      return "constant";
  }
  return "?";
}

NoiseConditioning noise_conditioning_from_string(const std::string& name) {
  if (name == "obs") return NoiseConditioning::ObsOnly;
  if (name == "obs_time") return NoiseConditioning::ObsAndTime;
  if (name == "constant") return NoiseConditioning::Constant;
  throw ConfigError("unknown noise conditioning '" + name + "'");
}

std::size_t NoiseHead::input_width(NoiseConditioning c, std::size_t cond_dim, std::size_t time_embed_dim) {
  switch (c) {
    case NoiseConditioning::ObsOnly:
      return cond_dim;
    case NoiseConditioning::ObsAndTime:
      return cond_dim + time_embed_dim;
    case NoiseConditioning::Constant:
      return 0;
  }
  return 0;
}

NoiseHead NoiseHead::create(const NoiseHeadConfig& config, std::size_t chunk_dim, std::size_t cond_dim,
                            std::size_t time_embed_dim, numerics::SeededRng& rng) {
  NoiseHead head;
  head.sigma_min = config.sigma_min;
  head.sigma_max = config.sigma_max;
  head.conditioning = config.conditioning;
  head.time_embed_dim = time_embed_dim;
  std::vector<std::size_t> widths{input_width(config.conditioning, cond_dim, time_embed_dim)};
  if (config.conditioning != NoiseConditioning::Constant) {
    widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  }
  widths.push_back(chunk_dim);
  head.net = MlpParams::init(widths, config.activation, rng);
  return head;
}

Matrix NoiseHead::assemble(const Matrix& obs, std::span<const double> t) const {
  const Eigen::Index rows = obs.rows();
  Matrix in(rows, static_cast<Eigen::Index>(net.input_dim()));
  if (conditioning == NoiseConditioning::Constant) return in;
  in.leftCols(obs.cols()) = obs;
  if (conditioning == NoiseConditioning::ObsAndTime) {
    if (t.size() != 1 && t.size() != static_cast<std::size_t>(rows)) throw ConfigError("noise head time shape mismatch");
    Vector buf(static_cast<Eigen::Index>(time_embed_dim));
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (r == 0 || t.size() > 1) {
        numerics::sinusoidal_embed_into(t[t.size() == 1 ? 0 : static_cast<std::size_t>(r)], {buf.data(), time_embed_dim});
      }
      in.block(r, obs.cols(), 1, static_cast<Eigen::Index>(time_embed_dim)) = buf.transpose();
    }
  }
  return in;
}

NoisyFlowPolicy NoisyFlowPolicy::create(flowmatch::VelocityField velocity, const NoiseHeadConfig& noise_config,
                                        flowmatch::DiscretizationScheme scheme, double clip_bound,
                                        numerics::SeededRng& rng) {
  NoiseHead head = NoiseHead::create(noise_config, velocity.chunk_dim(), velocity.cond_dim(),
                                     velocity.time_embed_dim(), rng);
  NoisyFlowPolicy p{std::move(velocity), std::move(head), std::move(scheme), clip_bound, noise_config.sigma_max};
  p.validate();
  return p;
}

void NoisyFlowPolicy::validate() const {
  if (!(noise.sigma_min > 0.0 || (noise.sigma_min == 0.0 && noise.sigma_max == 0.0))) {
    throw ConfigError("sigma_min must be positive");
  }
  if (noise.sigma_max < noise.sigma_min) throw ConfigError("sigma_max must be >= sigma_min");
  if (sigma_max_current < noise.sigma_min) throw ConfigError("current sigma_max is below sigma_min");
  if (!(clip_bound > 0.0)) throw ConfigError("clip bound must be positive");
  if (noise.net.output_dim() != velocity.chunk_dim()) throw ConfigError("noise head and velocity disagree on chunk dim");
  if (noise.net.input_dim() != NoiseHead::input_width(noise.conditioning, velocity.cond_dim(), noise.time_embed_dim)) {
    throw ConfigError("noise head input width does not match its conditioning");
  }
}

PolicyGrads PolicyGrads::zeros_like(const NoisyFlowPolicy& policy) {
  return {policy.velocity.net().zeros_like(), policy.noise.net.zeros_like()};
}

std::vector<double> PolicyGrads::flatten() const {
  auto flat = velocity.flatten();
  const auto n = noise.flatten();
  flat.insert(flat.end(), n.begin(), n.end());
  return flat;
}

void PolicyGrads::add_scaled(const PolicyGrads& other, double scale) {
  velocity.add_scaled(other.velocity, scale);
  noise.add_scaled(other.noise, scale);
}

std::vector<double> flatten_params(const NoisyFlowPolicy& policy) {
  auto flat = policy.velocity.net().flatten();
  const auto n = policy.noise.net.flatten();
  flat.insert(flat.end(), n.begin(), n.end());
  return flat;
}

void assign_params(NoisyFlowPolicy& policy, std::span<const double> flat) {
  const std::size_t nv = policy.velocity.net().param_count();
  if (flat.size() != nv + policy.noise.net.param_count()) throw ConfigError("policy parameter length mismatch");
  policy.velocity.net().assign(flat.first(nv));
  policy.noise.net.assign(flat.subspan(nv));
}

SigmaForward sigma_forward_batch(const NoisyFlowPolicy& policy, std::span<const double> t, const Matrix& a,
                                 const Matrix& obs) {
  const double lo = policy.noise.sigma_min;
  const double hi = policy.sigma_max_current;
  if (hi < lo) throw ConfigError("current sigma_max is below sigma_min");
  if (static_cast<std::size_t>(a.cols()) != policy.chunk_dim()) throw ConfigError("action chunk width mismatch");
  Matrix in = policy.noise.assemble(obs, t);
  if (in.rows() != a.rows()) in.resize(a.rows(), in.cols());  // constant head on an obs-less batch
  auto fwd = numerics::mlp_apply(policy.noise.net, in);
  SigmaForward out;
  out.raw = std::move(fwd.output);
  out.tape = std::move(fwd.tape);
  out.sigma = (lo + (hi - lo) * 0.5 * (out.raw.array().tanh() + 1.0)).matrix();
  return out;
}

Vector sigma_forward(const NoisyFlowPolicy& policy, double t, const Vector& a, const Vector& obs) {
  const double ts[] = {t};
  return sigma_forward_batch(policy, ts, flowmatch::as_row(a), flowmatch::as_row(obs)).sigma.row(0).transpose();
}

void sigma_backward(const NoisyFlowPolicy& policy, const SigmaForward& fwd, const Matrix& grad_sigma, MlpParams& grads) {
  const double half_range = 0.5 * (policy.sigma_max_current - policy.noise.sigma_min);
  const Matrix grad_raw = (grad_sigma.array() * half_range * (1.0 - fwd.raw.array().tanh().square())).matrix();
  numerics::mlp_backward(policy.noise.net, fwd.tape, grad_raw, grads);
}

Matrix integrate_clipped(const NoisyFlowPolicy& policy, const Matrix& a0, const Matrix& obs) {
  Matrix a = a0;
  const double bound = policy.clip_bound;
  for (std::size_t k = 0; k < policy.steps(); ++k) {
    const double t[] = {policy.scheme.t(k)};
    const double dt[] = {policy.scheme.dt(k)};
    Matrix v;
    try {
      v = policy.velocity.evaluate(a, obs, t, dt);
    } catch (const NumericError&) {
      throw NumericError("non-finite velocity during integration", static_cast<long>(k));
    }
    a = (a + dt[0] * v).cwiseMax(-bound).cwiseMin(bound);
    if (!a.allFinite()) throw NumericError("non-finite action during integration", static_cast<long>(k));
  }
  return a;
}

Matrix act_deterministic_batch(const NoisyFlowPolicy& policy, const Matrix& obs) {
  return integrate_clipped(policy, Matrix::Zero(obs.rows(), static_cast<Eigen::Index>(policy.chunk_dim())), obs);
}

Vector act_deterministic(const NoisyFlowPolicy& policy, const Vector& obs) {
  return act_deterministic_batch(policy, flowmatch::as_row(obs)).row(0).transpose();
}

}  // namespace reinflow::stochpolicy
