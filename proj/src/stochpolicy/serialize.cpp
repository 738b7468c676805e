#include "reinflow/stochpolicy/serialize.hpp"

#include <fstream>
#include <sstream>

#include "reinflow/errors.hpp"

namespace reinflow::stochpolicy {
namespace {

constexpr char kMagic[4] = {'R', 'F', 'P', 'L'};

}  // namespace

void write_policy(numerics::BinaryWriter& w, const NoisyFlowPolicy& p, std::uint64_t seed) {
  w.bytes(kMagic, 4);
  w.u32(kPolicyFormatVersion);
  w.u64(seed);
  w.u64(p.velocity.chunk_dim());
  w.u64(p.velocity.cond_dim());
  w.u64(p.velocity.time_embed_dim());
  w.u8(p.velocity.shortcut() ? 1 : 0);
  w.u64(p.scheme.knots().size());
  w.f64s(p.scheme.knots());
  w.f64(p.noise.sigma_min);
  w.f64(p.noise.sigma_max);
  w.f64(p.sigma_max_current);
  w.u8(static_cast<std::uint8_t>(p.noise.conditioning));
  w.f64(p.clip_bound);
  numerics::write_mlp(w, p.velocity.net());
  numerics::write_mlp(w, p.noise.net);
}

NoisyFlowPolicy read_policy(numerics::BinaryReader& r, std::uint64_t* seed) {
  char magic[4];
  r.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) throw CheckpointError("not a policy checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kPolicyFormatVersion) {
    throw CheckpointError("policy format version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kPolicyFormatVersion) + ")");
  }
  const std::uint64_t s = r.u64();
  if (seed != nullptr) *seed = s;
  const auto chunk = r.u64();
  const auto cond = r.u64();
  const auto embed = r.u64();
  const bool shortcut = r.u8() != 0;
  const auto n_knots = r.u64();
  if (n_knots < 2 || n_knots > 4096) throw CheckpointError("corrupt discretization in checkpoint");
  auto knots = r.f64s(n_knots);
  const double sigma_min = r.f64();
  const double sigma_max = r.f64();
  const double sigma_current = r.f64();
  const std::uint8_t cond_mode = r.u8();
  if (cond_mode > static_cast<std::uint8_t>(NoiseConditioning::Constant)) {
    throw CheckpointError("corrupt noise conditioning in checkpoint");
  }
  const double clip = r.f64();
  auto vnet = numerics::read_mlp(r);
  auto nnet = numerics::read_mlp(r);
  try {
    NoiseHead head{std::move(nnet), sigma_min, sigma_max, static_cast<NoiseConditioning>(cond_mode), embed};
    NoisyFlowPolicy p{flowmatch::VelocityField(std::move(vnet), chunk, cond, embed, shortcut), std::move(head),
                      flowmatch::DiscretizationScheme::from_knots(std::move(knots)), clip, sigma_current};
    p.validate();
    return p;
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("inconsistent policy checkpoint: ") + e.what());
  }
}

void save_policy(const std::filesystem::path& path, const NoisyFlowPolicy& policy, std::uint64_t seed) {
  std::ostringstream buf(std::ios::binary);
  numerics::BinaryWriter w(buf);
  write_policy(w, policy, seed);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  const std::string bytes = buf.str();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing " + path.string());
}

NoisyFlowPolicy load_policy(const std::filesystem::path& path, std::uint64_t* seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint not found: " + path.string());
  numerics::BinaryReader r(in);
  return read_policy(r, seed);
}

}  // namespace reinflow::stochpolicy
