#include "reinflow/flowmatch/schemes.hpp"

#include <algorithm>
#include <cmath>

#include "reinflow/errors.hpp"

namespace reinflow::flowmatch {

DiscretizationScheme DiscretizationScheme::uniform(std::size_t steps) {
  if (steps == 0) throw ConfigError("discretization needs at least one step");
  std::vector<double> knots(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) knots[k] = static_cast<double>(k) / static_cast<double>(steps);
  knots.back() = 1.0;
  return DiscretizationScheme(std::move(knots));
}

DiscretizationScheme DiscretizationScheme::from_knots(std::vector<double> knots) {
  if (knots.size() < 2) throw ConfigError("discretization needs at least one step");
  if (knots.front() != 0.0 || knots.back() != 1.0) throw ConfigError("knots must start at 0 and end at 1");
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    if (!(knots[k] < knots[k + 1])) throw ConfigError("knots must be strictly increasing");
  }
  return DiscretizationScheme(std::move(knots));
}

const char* to_string(TimeSamplerKind kind) {
  switch (kind) {
    case TimeSamplerKind::Uniform:
      return "uniform";
    case TimeSamplerKind::Beta:
      return "beta";
    case TimeSamplerKind::LogitNormal:
      return "logit_normal";
  }
  return "?";
}

TimeSamplerKind time_sampler_from_string(const std::string& name) {
  if (name == "uniform") return TimeSamplerKind::Uniform;
  if (name == "beta") return TimeSamplerKind::Beta;
  if (name == "logit_normal") return TimeSamplerKind::LogitNormal;
  throw ConfigError("unknown time sampler '" + name + "'");
}

void TimeSampler::validate() const {
  if (kind == TimeSamplerKind::Beta && !(beta_a > 0.0 && beta_b > 0.0 && std::isfinite(beta_a) && std::isfinite(beta_b))) {
    throw ConfigError("beta time sampler needs positive shape parameters");
  }
  if (kind == TimeSamplerKind::LogitNormal && !(logit_std > 0.0 && std::isfinite(logit_mean))) {
    throw ConfigError("logit-normal time sampler needs a positive std");
  }
}

double sample_time(const TimeSampler& sampler, numerics::SeededRng& rng) {
  sampler.validate();
  constexpr double kEdge = 1e-12;
  switch (sampler.kind) {
    case TimeSamplerKind::Uniform:
      return rng.uniform_open();
    case TimeSamplerKind::Beta:
      return std::clamp(rng.beta(sampler.beta_a, sampler.beta_b), kEdge, 1.0 - kEdge);
    case TimeSamplerKind::LogitNormal: {
      const double z = sampler.logit_mean + sampler.logit_std * rng.normal();
      return std::clamp(1.0 / (1.0 + std::exp(-z)), kEdge, 1.0 - kEdge);
    }
  }
  return 0.5;
}

}  // namespace reinflow::flowmatch
