#include "reinflow/envsim/expert.hpp"

#include "reinflow/errors.hpp"

namespace reinflow::envsim {

Vector scripted_expert(const PointMassState& state, const PointMassConfig& config, double eta,
                       numerics::SeededRng& rng, const ExpertGains& gains) {
  if (!(eta >= 0.0)) throw ConfigError("expert noise must be non-negative");
  PointMassState sim = state;
  Vector chunk(static_cast<Eigen::Index>(config.chunk_dim()));
  for (std::size_t i = 0; i < config.chunk; ++i) {
    Eigen::Vector2d a = gains.kp * (sim.g - sim.p) - gains.kd * sim.v;
    if (eta > 0.0) {
      a.x() += eta * rng.normal();
      a.y() += eta * rng.normal();
    }
    a = a.cwiseMax(-1.0).cwiseMin(1.0);
    chunk(static_cast<Eigen::Index>(2 * i)) = a.x();
    chunk(static_cast<Eigen::Index>(2 * i + 1)) = a.y();
    physics_tick(sim, a, config);
  }
  return chunk;
}

EvalResult evaluate_expert(const PointMassConfig& config, double eta, std::size_t episodes, std::uint64_t seed,
                           const ExpertGains& gains) {
  EvalResult out;
  PointMassEnv env(config);
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    numerics::SeededRng env_rng(seed, ep);
    numerics::SeededRng noise_rng(seed, (std::uint64_t{1} << 32) + ep);
    env.reset(env_rng);
    double ret = 0.0;
    bool success = false;
    for (;;) {
      const Vector chunk = scripted_expert(env.state(), config, eta, noise_rng, gains);
      const StepResult r = env.step_chunk({chunk.data(), static_cast<std::size_t>(chunk.size())}, env_rng);
      ret += r.reward;
      success = success || r.success;
      if (r.done) break;
    }
    out.returns.push_back(ret);
    out.successes.push_back(success ? 1 : 0);
  }
  for (std::size_t i = 0; i < episodes; ++i) {
    out.mean_return += out.returns[i];
    out.success_rate += out.successes[i];
  }
  if (episodes > 0) {
    out.mean_return /= static_cast<double>(episodes);
    out.success_rate /= static_cast<double>(episodes);
  }
  return out;
}

}  // namespace reinflow::envsim
