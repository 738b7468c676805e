#include "reinflow/numerics/binary_io.hpp"

#include <bit>
#include <cstring>

#include "reinflow/errors.hpp"

namespace reinflow::numerics {
namespace {

constexpr std::uint64_t kMaxLength = std::uint64_t{1} << 32;

template <typename T>
void put_le(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFFU);
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(BinaryReader& r) {
  unsigned char buf[sizeof(T)];
  r.bytes(buf, sizeof(T));
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void BinaryWriter::u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
void BinaryWriter::u32(std::uint32_t v) { put_le(out_, v); }
void BinaryWriter::u64(std::uint64_t v) { put_le(out_, v); }
void BinaryWriter::f64(double v) { put_le(out_, std::bit_cast<std::uint64_t>(v)); }
void BinaryWriter::f64s(std::span<const double> values) {
  for (double v : values) f64(v);
}
void BinaryWriter::str(const std::string& s) {
  u64(s.size());
  bytes(s.data(), s.size());
}
void BinaryWriter::bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n)); }

void BinaryReader::bytes(void* data, std::size_t n) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) throw CheckpointError("checkpoint is truncated");
}
std::uint8_t BinaryReader::u8() {
  std::uint8_t v = 0;
  bytes(&v, 1);
  return v;
}
std::uint32_t BinaryReader::u32() { return get_le<std::uint32_t>(*this); }
std::uint64_t BinaryReader::u64() { return get_le<std::uint64_t>(*this); }
double BinaryReader::f64() { return std::bit_cast<double>(get_le<std::uint64_t>(*this)); }
std::vector<double> BinaryReader::f64s(std::size_t n) {
  if (n > kMaxLength) throw CheckpointError("corrupt array length in checkpoint");
  std::vector<double> v(n);
  for (double& x : v) x = f64();
  return v;
}
std::string BinaryReader::str() {
  const std::uint64_t n = u64();
  if (n > kMaxLength) throw CheckpointError("corrupt string length in checkpoint");
  std::string s(n, '\0');
  bytes(s.data(), n);
  return s;
}

void write_mlp(BinaryWriter& w, const MlpParams& net) {
  w.u32(static_cast<std::uint32_t>(net.widths.size()));
  for (std::size_t width : net.widths) w.u64(width);
  w.u8(static_cast<std::uint8_t>(net.activation));
  w.f64s(net.flatten());
}

MlpParams read_mlp(BinaryReader& r) {
  const std::uint32_t n = r.u32();
  if (n < 2 || n > 64) throw CheckpointError("corrupt layer count in checkpoint");
  std::vector<std::size_t> widths(n);
  for (auto& width : widths) {
    width = r.u64();
    if (width > (1U << 20)) throw CheckpointError("corrupt layer width in checkpoint");
  }
  const std::uint8_t act = r.u8();
  if (act > static_cast<std::uint8_t>(Activation::Identity)) throw CheckpointError("corrupt activation in checkpoint");
  MlpParams net;
  try {
    net = MlpParams::zeros(widths, static_cast<Activation>(act));
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("corrupt network header: ") + e.what());
  }
  net.assign(r.f64s(net.param_count()));
  return net;
}

}  // namespace reinflow::numerics
