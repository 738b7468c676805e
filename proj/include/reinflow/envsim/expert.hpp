#pragma once

#include <cstdint>

#include "reinflow/envsim/point_mass.hpp"

namespace reinflow::envsim {

struct ExpertGains {
  double kp = 1.0;
  double kd = 0.8;
};

// PD controller a = clip(kp (g - p) - kd v + eta * eps, +-1), simulated
// forward over one chunk so the C actions are coherent.
Vector scripted_expert(const PointMassState& state, const PointMassConfig& config, double eta,
                       numerics::SeededRng& rng, const ExpertGains& gains = {});

struct EvalResult {
  double mean_return = 0.0;
  double success_rate = 0.0;
  std::vector<double> returns;
  std::vector<std::uint8_t> successes;
};

// Episode i resets from stream (seed, i), so expert and policy evaluations
// with the same seed see the same start/goal pairs.
EvalResult evaluate_expert(const PointMassConfig& config, double eta, std::size_t episodes, std::uint64_t seed,
                           const ExpertGains& gains = {});

}  // namespace reinflow::envsim
