#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace reinflow::numerics {

// Seeded random stream. Only the raw 64-bit engine comes from the standard
// library; every distribution is implemented here so that identical
// (seed, stream, call sequence) gives identical values on every platform.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1).
  double uniform();
  // Uniform on (0, 1).
  double uniform_open();
  double normal();
  double rademacher();
  // Marsaglia-Tsang; shape > 0.
  double gamma(double shape);
  double beta(double a, double b);
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  void fill_normal(std::span<double> out);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  // Text snapshot of the engine state, for checkpoints.
  std::string serialize() const;
  static SeededRng deserialize(const std::string& blob);

  bool operator==(const SeededRng& other) const { return engine_ == other.engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

// Derive `count` independent streams from one root seed.
std::vector<SeededRng> make_streams(std::uint64_t seed, std::size_t count, std::uint64_t first_stream = 0);

}  // namespace reinflow::numerics
