#pragma once

#include <cstddef>

namespace reinflow::stochpolicy {

// Upper noise bound held at sigma_max for the first hold_fraction of the run,
// then decayed linearly to decay_mix * sigma_min + (1 - decay_mix) * sigma_max
// at iteration total_iterations.
struct NoiseSchedule {
  double hold_fraction = 0.35;
  double decay_mix = 0.3;
  std::size_t total_iterations = 1000;

  void validate() const;
};

double noise_bound_at(const NoiseSchedule& schedule, std::size_t iter, double sigma_min, double sigma_max);

}  // namespace reinflow::stochpolicy
