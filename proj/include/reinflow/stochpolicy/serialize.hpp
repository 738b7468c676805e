#pragma once

#include <cstdint>
#include <filesystem>

#include "reinflow/numerics/binary_io.hpp"
#include "reinflow/stochpolicy/policy.hpp"

namespace reinflow::stochpolicy {

inline constexpr std::uint32_t kPolicyFormatVersion = 1;

// Header (format version, dims, sigma bounds, scheme knots, conditioning,
// clip bound, seed) followed by the velocity and noise networks as flat
// little-endian float64 arrays.
void write_policy(numerics::BinaryWriter& w, const NoisyFlowPolicy& policy, std::uint64_t seed);
NoisyFlowPolicy read_policy(numerics::BinaryReader& r, std::uint64_t* seed = nullptr);

void save_policy(const std::filesystem::path& path, const NoisyFlowPolicy& policy, std::uint64_t seed);
NoisyFlowPolicy load_policy(const std::filesystem::path& path, std::uint64_t* seed = nullptr);

}  // namespace reinflow::stochpolicy
