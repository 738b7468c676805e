#include "reinflow/stochpolicy/noise_schedule.hpp"

#include <algorithm>

#include "reinflow/errors.hpp"

namespace reinflow::stochpolicy {

void NoiseSchedule::validate() const {
  if (!(hold_fraction >= 0.0 && hold_fraction <= 1.0)) throw ConfigError("noise hold fraction must lie in [0, 1]");
  if (!(decay_mix >= 0.0 && decay_mix <= 1.0)) throw ConfigError("noise decay mix must lie in [0, 1]");
}

double noise_bound_at(const NoiseSchedule& s, std::size_t iter, double sigma_min, double sigma_max) {
  s.validate();
  const double target = s.decay_mix * sigma_min + (1.0 - s.decay_mix) * sigma_max;
  const double total = static_cast<double>(s.total_iterations);
  const double hold_end = s.hold_fraction * total;
  const double it = std::min(static_cast<double>(iter), total);
  if (s.hold_fraction >= 1.0 || it < hold_end || total <= hold_end) return sigma_max;
  const double progress = (it - hold_end) / (total - hold_end);
  return std::max(sigma_min, sigma_max + progress * (target - sigma_max));
}

}  // namespace reinflow::stochpolicy
