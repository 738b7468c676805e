#pragma once

#include <cstddef>
#include <span>

#include "reinflow/numerics/mlp.hpp"

namespace reinflow::numerics {

// Sinusoidal embedding of a scalar in [0, 1]: the first dim/2 entries are
// sin(t * f_i), the rest cos(t * f_i), with frequencies f_i spaced
// geometrically from 1 down to 1e-4.
Vector sinusoidal_embed(double t, std::size_t dim);
void sinusoidal_embed_into(double t, std::span<double> out);

}  // namespace reinflow::numerics
