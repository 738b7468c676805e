#include "reinflow/numerics/embedding.hpp"

#include <cmath>

#include "reinflow/errors.hpp"

namespace reinflow::numerics {

void sinusoidal_embed_into(double t, std::span<double> out) {
  const std::size_t dim = out.size();
  if (dim < 2 || dim % 2 != 0) throw ConfigError("embedding dimension must be even and >= 2");
  const std::size_t half = dim / 2;
  const double step = half > 1 ? std::log(10000.0) / static_cast<double>(half - 1) : 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    const double arg = t * std::exp(-step * static_cast<double>(i));
    out[i] = std::sin(arg);
    out[half + i] = std::cos(arg);
  }
}

Vector sinusoidal_embed(double t, std::size_t dim) {
  if (dim < 2 || dim % 2 != 0) throw ConfigError("embedding dimension must be even and >= 2");
  Vector v(static_cast<Eigen::Index>(dim));
  sinusoidal_embed_into(t, {v.data(), dim});
  return v;
}

}  // namespace reinflow::numerics
