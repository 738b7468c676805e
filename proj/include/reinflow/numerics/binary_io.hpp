#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "reinflow/numerics/mlp.hpp"

namespace reinflow::numerics {

// Little-endian scalar stream used by every checkpoint file.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void f64s(std::span<const double> values);
  void str(const std::string& s);
  void bytes(const void* data, std::size_t n);

 private:
  std::ostream& out_;
};

// Reads what BinaryWriter wrote; throws CheckpointError on truncation.
class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::vector<double> f64s(std::size_t n);
  std::string str();
  void bytes(void* data, std::size_t n);

 private:
  std::istream& in_;
};

// Layer widths, activation, then the flat parameters in declaration order.
void write_mlp(BinaryWriter& w, const MlpParams& net);
MlpParams read_mlp(BinaryReader& r);

}  // namespace reinflow::numerics
