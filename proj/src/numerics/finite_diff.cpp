#include "reinflow/numerics/finite_diff.hpp"

#include <algorithm>
#include <cmath>

#include "reinflow/errors.hpp"

namespace reinflow::numerics {

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& loss,
                                     std::vector<double> params, double h) {
  if (!(h > 0.0)) throw ConfigError("finite difference step must be positive");
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = loss(params);
    params[i] = saved - h;
    const double down = loss(params);
    params[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("non-finite loss at perturbed point", static_cast<long>(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

MlpParams finite_diff_grad(const std::function<double(const MlpParams&)>& loss, const MlpParams& params, double h) {
  MlpParams probe = params;
  auto flat_loss = [&](std::span<const double> flat) {
    probe.assign(flat);
    return loss(probe);
  };
  MlpParams grads = params.zeros_like();
  grads.assign(finite_diff_grad(flat_loss, params.flatten(), h));
  return grads;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor) {
  if (analytic.size() != numeric.size()) throw ConfigError("gradient length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace reinflow::numerics
