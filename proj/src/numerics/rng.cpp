#include "reinflow/numerics/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "reinflow/errors.hpp"

namespace reinflow::numerics {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(splitmix64(seed) ^ splitmix64(splitmix64(stream + 0x5851F42D4C957F2DULL))) {}

double SeededRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double SeededRng::uniform_open() {
  // (k + 0.5) / 2^53 never hits either endpoint.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double SeededRng::normal() {
  // Box-Muller, one variate per call (no cached spare keeps the state a pure
  // function of the engine).
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double SeededRng::rademacher() { return (engine_() >> 63) != 0U ? 1.0 : -1.0; }

double SeededRng::gamma(double shape) {
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw ConfigError("gamma shape must be positive and finite");
  }
  if (shape < 1.0) {
    // Boost to shape + 1 and rescale by U^(1/shape).
    const double g = gamma(shape + 1.0);
    return g * std::pow(uniform_open(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double SeededRng::beta(double a, double b) {
  const double x = gamma(a);
  const double y = gamma(b);
  return x / (x + y);
}

std::size_t SeededRng::index(std::size_t n) {
  if (n == 0) throw ContractError("index() on empty range");
  // Lemire-style rejection to stay unbiased.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = engine_();
    if (r >= threshold) return static_cast<std::size_t>(r % bound);
  }
}

void SeededRng::fill_normal(std::span<double> out) {
  for (double& x : out) x = normal();
}

std::string SeededRng::serialize() const {
  std::ostringstream os;
  os << seed_ << ' ' << stream_ << ' ' << engine_;
  return os.str();
}

SeededRng SeededRng::deserialize(const std::string& blob) {
  std::istringstream is(blob);
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  is >> seed >> stream;
  SeededRng rng(seed, stream);
  is >> rng.engine_;
  if (is.fail()) throw CheckpointError("corrupt rng state");
  return rng;
}

std::vector<SeededRng> make_streams(std::uint64_t seed, std::size_t count, std::uint64_t first_stream) {
  std::vector<SeededRng> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.emplace_back(seed, first_stream + i);
  return out;
}

}  // namespace reinflow::numerics
