#pragma once

#include <functional>
#include <span>
#include <vector>

#include "reinflow/numerics/mlp.hpp"

namespace reinflow::numerics {

// Central-difference gradient oracles. Used to check every analytic gradient
// in the library; they never share code with the code paths they check.
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& loss,
                                     std::vector<double> params, double h);

MlpParams finite_diff_grad(const std::function<double(const MlpParams&)>& loss, const MlpParams& params, double h);

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). Entries whose magnitude is
// below `floor` are compared in absolute terms scaled by `floor`.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor = 1e-3);

}  // namespace reinflow::numerics
