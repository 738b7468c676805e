#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "reinflow/numerics/rng.hpp"

namespace reinflow::flowmatch {

// Knots 0 = t_0 < t_1 < ... < t_K = 1.
class DiscretizationScheme {
 public:
  static DiscretizationScheme uniform(std::size_t steps);
  static DiscretizationScheme from_knots(std::vector<double> knots);

  std::size_t steps() const { return knots_.size() - 1; }
  double t(std::size_t k) const { return knots_[k]; }
  double dt(std::size_t k) const { return knots_[k + 1] - knots_[k]; }
  const std::vector<double>& knots() const { return knots_; }

  bool operator==(const DiscretizationScheme&) const = default;

 private:
  explicit DiscretizationScheme(std::vector<double> knots) : knots_(std::move(knots)) {}
  std::vector<double> knots_;
};

enum class TimeSamplerKind { Uniform, Beta, LogitNormal };

const char* to_string(TimeSamplerKind kind);
TimeSamplerKind time_sampler_from_string(const std::string& name);

struct TimeSampler {
  TimeSamplerKind kind = TimeSamplerKind::Uniform;
  double beta_a = 1.5;
  double beta_b = 1.0;
  double logit_mean = 0.0;
  double logit_std = 1.0;

  void validate() const;
};

// Draw t in the open interval (0, 1).
double sample_time(const TimeSampler& sampler, numerics::SeededRng& rng);

}  // namespace reinflow::flowmatch
