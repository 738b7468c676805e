#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "reinflow/envsim/expert.hpp"
#include "reinflow/flowmatch/dataset.hpp"

namespace reinflow::envsim {

struct DemoSet {
  flowmatch::FlowDataset data{0, 0};
  std::vector<double> episode_returns;
  std::vector<std::uint8_t> episode_successes;
  TaskKind task = TaskKind::Dense;
  double eta = 0.0;
  std::uint64_t seed = 0;

  std::size_t episodes() const { return episode_returns.size(); }
  double mean_return() const;
  double success_rate() const;
};

// Rolls the scripted expert for `episodes` episodes and records
// (observation -> executed chunk) pairs.
DemoSet generate_demos(const PointMassConfig& config, double eta, std::size_t episodes, std::uint64_t seed,
                       const ExpertGains& gains = {});

// Writes the dataset text file at `path` and a JSON manifest at `path` + ".json".
void write_demos(const std::filesystem::path& path, const DemoSet& demos);

}  // namespace reinflow::envsim
