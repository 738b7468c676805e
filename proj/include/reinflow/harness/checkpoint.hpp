#pragma once

#include <cstdint>
#include <filesystem>

#include "reinflow/numerics/binary_io.hpp"
#include "reinflow/rlcore/trainer.hpp"

namespace reinflow::harness {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Fine-tuning checkpoint: policy, frozen reference, critic, both Adam states,
// iteration counter, every RNG stream, env states and the reward scaler.
void write_checkpoint(numerics::BinaryWriter& w, const rlcore::TrainerState& state, std::uint64_t seed);
rlcore::TrainerState read_checkpoint(numerics::BinaryReader& r, std::uint64_t* seed = nullptr);

// Written to a temporary file and renamed, so a crash never leaves a partial
// checkpoint at `path`.
void save_checkpoint(const std::filesystem::path& path, const rlcore::TrainerState& state, std::uint64_t seed);
rlcore::TrainerState load_checkpoint(const std::filesystem::path& path, std::uint64_t* seed = nullptr);

}  // namespace reinflow::harness
