#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "reinflow/envsim/point_mass.hpp"
#include "reinflow/flowmatch/pretrain.hpp"
#include "reinflow/flowmatch/velocity_field.hpp"
#include "reinflow/rlcore/critic.hpp"
#include "reinflow/rlcore/trainer.hpp"
#include "reinflow/stochpolicy/policy.hpp"

namespace reinflow::harness {

// Everything a workflow reads. Loaded from an INI-style file:
//   [section]
//   key = value   # comment
struct RunConfig {
  std::uint64_t seed = 0;
  envsim::PointMassConfig env;

  // Demonstrations used for pretraining.
  double demo_eta = 0.0;
  std::size_t demo_episodes = 200;
  std::string demo_path = "demos.csv";

  flowmatch::VelocityFieldConfig model;
  std::size_t denoising_steps = 4;
  double clip_bound = 1.0;
  rlcore::CriticConfig critic;

  flowmatch::PretrainConfig pretrain;
  std::string pretrained_path = "pretrained.rfpl";

  rlcore::FinetuneConfig finetune;
  std::size_t eval_episodes = 100;
  std::uint64_t eval_seed = 12345;

  stochpolicy::NoiseHeadConfig noise;

  std::string out_dir = "runs/default";
  std::size_t flush_every = 1;
  std::size_t checkpoint_every = 0;
  std::vector<std::string> plot_columns = {"mean_episode_reward_raw", "success_rate"};

  // Fills fields that follow from others (dims from the env, schedule length
  // from the iteration count) and validates everything.
  void finalize();
};

struct ConfigKey {
  std::string section;
  std::string key;
};

// Every accepted key, in file order.
std::vector<ConfigKey> config_keys();

// Unknown sections/keys and malformed values throw ConfigError naming
// `section.key`.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// Full config with every key spelled out; parse_config(resolved_config(c))
// reproduces c.
std::string resolved_config(const RunConfig& config);

// Raw value of one key as it would be written by resolved_config.
std::string config_value(const RunConfig& config, const std::string& section, const std::string& key);
void set_config_value(RunConfig& config, const std::string& section, const std::string& key,
                      const std::string& value);

}  // namespace reinflow::harness
