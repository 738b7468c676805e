#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "reinflow/rlcore/buffer.hpp"

namespace reinflow::rlcore {

struct GaeResult {
  Vector advantages;      // normalised when requested
  Vector raw_advantages;  // before normalisation
  Vector returns;         // raw_advantages + values
};

// delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t
// A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
// Arrays are step-major (index = step * n_envs + env); `bootstrap` is the
// value of the observation after the last step of each env.
GaeResult gae_advantages(const Vector& rewards, const Vector& values, const std::vector<std::uint8_t>& dones,
                         const Vector& bootstrap, std::size_t n_envs, std::size_t n_steps, double gamma,
                         double lambda, bool normalize);

GaeResult gae_advantages(const RolloutBuffer& buffer, double gamma, double lambda, bool normalize);

}  // namespace reinflow::rlcore
