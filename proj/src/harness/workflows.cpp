#include "reinflow/harness/workflows.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "json.hpp"
#include "reinflow/envsim/demos.hpp"
#include "reinflow/errors.hpp"
#include "reinflow/flowmatch/pretrain.hpp"
#include "reinflow/harness/checkpoint.hpp"
#include "reinflow/harness/metrics.hpp"
#include "reinflow/harness/plot.hpp"
#include "reinflow/stochpolicy/serialize.hpp"

namespace reinflow::harness {

namespace {

// Stream ids carved out of the run seed.
constexpr std::uint64_t kFieldInitStream = 11;
constexpr std::uint64_t kPretrainStream = 12;
constexpr std::uint64_t kNoiseInitStream = 13;
constexpr std::uint64_t kCriticInitStream = 14;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void prepare(const RunConfig& config, const std::string& stage) {
  const auto root = output_root(config);
  std::filesystem::create_directories(root);
  write_text(root / (stage + ".resolved.ini"), resolved_config(config));
}

nlohmann::json eval_json(const envsim::EvalResult& r) {
  return {{"episodes", r.returns.size()}, {"mean_return", r.mean_return}, {"success_rate", r.success_rate}};
}

bool is_trainer_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::string(magic, 4) == "RFCK";
}

}  // namespace

std::filesystem::path output_root(const RunConfig& config) {
  if (const char* env = std::getenv("REINFLOW_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return config.out_dir;
}

std::filesystem::path resolve_output(const RunConfig& config, const std::string& path) {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : output_root(config) / p;
}

DemosOutcome run_demos(const RunConfig& config) {
  prepare(config, "demos");
  const auto demos = envsim::generate_demos(config.env, config.demo_eta, config.demo_episodes, config.seed);
  DemosOutcome out{resolve_output(config, config.demo_path), demos.data.size(), demos.mean_return(),
                   demos.success_rate()};
  std::filesystem::create_directories(out.dataset.parent_path());
  envsim::write_demos(out.dataset, demos);
  return out;
}

PretrainOutcome run_pretrain(const RunConfig& config) {
  prepare(config, "pretrain");
  const auto dataset_path = resolve_output(config, config.demo_path);
  if (!std::filesystem::exists(dataset_path)) run_demos(config);
  const auto data = flowmatch::read_dataset(dataset_path);
  if (data.chunk_dim() != config.model.chunk_dim || data.cond_dim() != config.model.cond_dim) {
    throw ConfigError("demo dataset dimensions do not match env.chunk");
  }

  numerics::SeededRng init_rng(config.seed, kFieldInitStream);
  auto field = flowmatch::VelocityField::create(config.model, init_rng);
  numerics::SeededRng train_rng(config.seed, kPretrainStream);
  const auto metrics_path = output_root(config) / "pretrain_metrics.csv";
  MetricsLog log(metrics_path, {"step", "loss", "lr"}, config.flush_every);
  PretrainOutcome out;
  flowmatch::pretrain(field, data, config.pretrain, train_rng, [&](std::size_t step, double loss) {
    log.append({static_cast<double>(step), loss, numerics::schedule_lr(config.pretrain.lr, step)});
    out.final_loss = loss;
  });
  log.flush();

  numerics::SeededRng noise_rng(config.seed, kNoiseInitStream);
  const auto policy =
      stochpolicy::NoisyFlowPolicy::create(std::move(field), config.noise,
                                           flowmatch::DiscretizationScheme::uniform(config.denoising_steps),
                                           config.clip_bound, noise_rng);
  out.policy = resolve_output(config, config.pretrained_path);
  std::filesystem::create_directories(out.policy.parent_path());
  stochpolicy::save_policy(out.policy, policy, config.seed);
  out.eval = envsim::evaluate_policy(policy, config.env, config.eval_episodes, config.eval_seed);

  nlohmann::json summary = {{"final_loss", out.final_loss}, {"eval", eval_json(out.eval)}};
  write_text(output_root(config) / "pretrain_summary.json", summary.dump(2) + "\n");
  return out;
}

FinetuneOutcome run_finetune(const RunConfig& config, const std::optional<std::filesystem::path>& resume,
                             std::optional<std::size_t> stop_after) {
  const auto columns = rlcore::MetricsRow::columns();
  for (const auto& c : config.plot_columns) {
    if (std::find(columns.begin(), columns.end(), c) == columns.end()) {
      throw ConfigError("unknown metrics column '" + c + "' in logging.plot_columns");
    }
  }
  prepare(config, "finetune");
  const auto root = output_root(config);
  FinetuneOutcome out;
  out.checkpoint = root / "finetune.ckpt";
  out.metrics = root / "finetune_metrics.csv";
  out.plot = root / "finetune_metrics.svg";

  const auto pretrained_path = resolve_output(config, config.pretrained_path);
  if (!std::filesystem::exists(pretrained_path)) {
    throw CheckpointError("pretrained policy not found: " + pretrained_path.string());
  }
  // The pretrained velocity field is kept; the noise head, discretization and
  // clip bound come from this config.
  const auto pretrained = stochpolicy::load_policy(pretrained_path);
  if (pretrained.chunk_dim() != config.model.chunk_dim || pretrained.cond_dim() != config.model.cond_dim) {
    throw ConfigError("pretrained policy dimensions do not match the env");
  }
  numerics::SeededRng noise_rng(config.seed, kNoiseInitStream);
  auto policy = stochpolicy::NoisyFlowPolicy::create(
      pretrained.velocity, config.noise, flowmatch::DiscretizationScheme::uniform(config.denoising_steps),
      config.clip_bound, noise_rng);
  out.pretrained_eval = envsim::evaluate_policy(policy, config.env, config.eval_episodes, config.eval_seed);

  std::optional<rlcore::TrainerState> state;
  if (resume.has_value()) {
    state.emplace(load_checkpoint(*resume));
    if (state->venv.size() != config.finetune.n_envs) throw ConfigError("finetune.n_envs differs from the checkpoint");
  } else {
    numerics::SeededRng critic_rng(config.seed, kCriticInitStream);
    auto critic = rlcore::Critic::create(config.critic, envsim::PointMassConfig::obs_dim(), critic_rng);
    state.emplace(rlcore::TrainerState::create(std::move(policy), std::move(critic), config.env, config.finetune,
                                               config.seed));
  }

  const std::size_t start = state->iteration;
  MetricsLog log(out.metrics, rlcore::MetricsRow::columns(), config.flush_every,
                 resume.has_value() ? std::optional<std::size_t>(start) : std::nullopt);
  const std::size_t end = std::min(config.finetune.iterations, stop_after.value_or(config.finetune.iterations));
  while (state->iteration < end) {
    rlcore::MetricsRow row;
    try {
      row = rlcore::finetune_iteration(*state, config.finetune);
    } catch (const rlcore::TrainingAbort& e) {
      log.flush();
      const auto dump = root / ("abort_iter" + std::to_string(state->iteration) + ".txt");
      write_text(dump, std::string(e.what()) + "\n" + e.dump());
      throw NumericAbort(e.what(), dump);
    }
    log.append(row.values());
    if (config.checkpoint_every > 0 && state->iteration % config.checkpoint_every == 0) {
      save_checkpoint(out.checkpoint, *state, config.seed);
    }
  }
  log.flush();
  save_checkpoint(out.checkpoint, *state, config.seed);

  out.final_eval = envsim::evaluate_policy(state->policy, config.env, config.eval_episodes, config.eval_seed);
  emit_plot(out.metrics, config.plot_columns, out.plot,
            {{"mean_episode_reward_raw", out.pretrained_eval.mean_return},
             {"success_rate", out.pretrained_eval.success_rate}});
  nlohmann::json summary = {{"iterations", state->iteration},
                            {"pretrained_eval", eval_json(out.pretrained_eval)},
                            {"final_eval", eval_json(out.final_eval)},
                            {"metrics_schema_version", kMetricsSchemaVersion}};
  write_text(root / "finetune_summary.json", summary.dump(2) + "\n");
  return out;
}

envsim::EvalResult run_eval(const RunConfig& config, const std::filesystem::path& checkpoint, std::size_t episodes) {
  if (!std::filesystem::exists(checkpoint)) throw CheckpointError("checkpoint not found: " + checkpoint.string());
  const auto policy = is_trainer_checkpoint(checkpoint) ? load_checkpoint(checkpoint).policy
                                                        : stochpolicy::load_policy(checkpoint);
  if (policy.chunk_dim() != config.env.chunk_dim()) throw ConfigError("policy chunk size does not match env.chunk");
  const auto result = envsim::evaluate_policy(policy, config.env, episodes, config.eval_seed);
  std::filesystem::create_directories(output_root(config));
  nlohmann::json j = eval_json(result);
  j["checkpoint"] = checkpoint.string();
  j["returns"] = result.returns;
  write_text(output_root(config) / "eval.json", j.dump(2) + "\n");
  return result;
}

}  // namespace reinflow::harness
