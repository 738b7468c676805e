#include "reinflow/harness/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "reinflow/errors.hpp"

namespace reinflow::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    char tmp[64];
    std::snprintf(tmp, sizeof tmp, "%.*g", prec, v);
    if (std::strtod(tmp, nullptr) == v) return tmp;
  }
  return buf;
}

double parse_double(const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw std::invalid_argument("expected a number");
  return out;
}

std::uint64_t parse_uint(const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw std::invalid_argument("expected a non-negative integer");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected true or false");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> parse_widths(const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& s : split_list(v)) out.push_back(static_cast<std::size_t>(parse_uint(s)));
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

std::string join_widths(const std::vector<std::size_t>& w) {
  std::vector<std::string> s;
  for (auto x : w) s.push_back(std::to_string(x));
  return join(s);
}

struct KeySpec {
  const char* section;
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
KeySpec real(const char* sec, const char* key, T RunConfig::*outer, double T::*field) {
  return {sec, key, [=](RunConfig& c, const std::string& v) { (c.*outer).*field = parse_double(v); },
          [=](const RunConfig& c) { return fmt_double((c.*outer).*field); }};
}

template <typename T>
KeySpec count(const char* sec, const char* key, T RunConfig::*outer, std::size_t T::*field) {
  return {sec, key, [=](RunConfig& c, const std::string& v) { (c.*outer).*field = parse_uint(v); },
          [=](const RunConfig& c) { return std::to_string((c.*outer).*field); }};
}

KeySpec top_real(const char* sec, const char* key, double RunConfig::*field) {
  return {sec, key, [=](RunConfig& c, const std::string& v) { c.*field = parse_double(v); },
          [=](const RunConfig& c) { return fmt_double(c.*field); }};
}

template <typename U>
KeySpec top_uint(const char* sec, const char* key, U RunConfig::*field) {
  return {sec, key, [=](RunConfig& c, const std::string& v) { c.*field = static_cast<U>(parse_uint(v)); },
          [=](const RunConfig& c) { return std::to_string(c.*field); }};
}

KeySpec top_string(const char* sec, const char* key, std::string RunConfig::*field) {
  return {sec, key, [=](RunConfig& c, const std::string& v) { c.*field = v; },
          [=](const RunConfig& c) { return c.*field; }};
}

// Accessors for nested finetune members.
#define FT_REAL(sec, key, expr)                                                              \
  KeySpec {                                                                                  \
    sec, key, [](RunConfig& c, const std::string& v) { c.finetune.expr = parse_double(v); }, \
        [](const RunConfig& c) { return fmt_double(c.finetune.expr); }                       \
  }
#define FT_COUNT(sec, key, expr)                                                           \
  KeySpec {                                                                                \
    sec, key, [](RunConfig& c, const std::string& v) { c.finetune.expr = parse_uint(v); }, \
        [](const RunConfig& c) { return std::to_string(c.finetune.expr); }                 \
  }
#define FT_BOOL(sec, key, expr)                                                            \
  KeySpec {                                                                                \
    sec, key, [](RunConfig& c, const std::string& v) { c.finetune.expr = parse_bool(v); }, \
        [](const RunConfig& c) { return std::string(c.finetune.expr ? "true" : "false"); } \
  }

template <typename Outer>
KeySpec lr_kind(const char* sec, const char* key, Outer RunConfig::*outer, numerics::LrSchedule Outer::*which) {
  return {sec, key,
          [=](RunConfig& c, const std::string& v) {
            if (v == "cosine") {
              ((c.*outer).*which).kind = numerics::LrScheduleKind::CosineWarmRestart;
            } else if (v == "constant") {
              ((c.*outer).*which).kind = numerics::LrScheduleKind::Constant;
            } else {
              throw std::invalid_argument("expected cosine or constant");
            }
          },
          [=](const RunConfig& c) {
            return std::string(((c.*outer).*which).kind == numerics::LrScheduleKind::Constant ? "constant"
                                                                                                : "cosine");
          }};
}

const std::vector<KeySpec>& key_table() {
  using RC = RunConfig;
  using PM = envsim::PointMassConfig;
  static const std::vector<KeySpec> table = {
      // [env]
      top_uint("env", "seed", &RC::seed),
      {"env", "task", [](RC& c, const std::string& v) { c.env.task = envsim::task_kind_from_string(v); },
       [](const RC& c) { return std::string(envsim::to_string(c.env.task)); }},
      real("env", "dt", &RC::env, &PM::dt),
      real("env", "v_max", &RC::env, &PM::v_max),
      real("env", "arena", &RC::env, &PM::arena),
      real("env", "goal_range", &RC::env, &PM::goal_range),
      real("env", "start_range", &RC::env, &PM::start_range),
      count("env", "horizon", &RC::env, &PM::horizon),
      count("env", "chunk", &RC::env, &PM::chunk),
      real("env", "obs_noise", &RC::env, &PM::obs_noise),
      real("env", "success_radius", &RC::env, &PM::success_radius),
      real("env", "action_cost", &RC::env, &PM::action_cost),
      top_real("env", "demo_eta", &RC::demo_eta),
      top_uint("env", "demo_episodes", &RC::demo_episodes),
      top_string("env", "demo_path", &RC::demo_path),

      // [model]
      top_uint("model", "denoising_steps", &RC::denoising_steps),
      count("model", "time_embed_dim", &RC::model, &flowmatch::VelocityFieldConfig::time_embed_dim),
      {"model", "hidden", [](RC& c, const std::string& v) { c.model.hidden = parse_widths(v); },
       [](const RC& c) { return join_widths(c.model.hidden); }},
      {"model", "activation",
       [](RC& c, const std::string& v) { c.model.activation = numerics::activation_from_string(v); },
       [](const RC& c) { return std::string(numerics::to_string(c.model.activation)); }},
      {"model", "shortcut", [](RC& c, const std::string& v) { c.model.shortcut = parse_bool(v); },
       [](const RC& c) { return std::string(c.model.shortcut ? "true" : "false"); }},
      top_real("model", "clip_bound", &RC::clip_bound),
      {"model", "critic_hidden", [](RC& c, const std::string& v) { c.critic.hidden = parse_widths(v); },
       [](const RC& c) { return join_widths(c.critic.hidden); }},
      {"model", "critic_activation",
       [](RC& c, const std::string& v) { c.critic.activation = numerics::activation_from_string(v); },
       [](const RC& c) { return std::string(numerics::to_string(c.critic.activation)); }},
      real("model", "critic_output_bias", &RC::critic, &rlcore::CriticConfig::output_bias),

      // [pretrain]
      count("pretrain", "steps", &RC::pretrain, &flowmatch::PretrainConfig::steps),
      count("pretrain", "batch_size", &RC::pretrain, &flowmatch::PretrainConfig::batch_size),
      lr_kind("pretrain", "lr_kind", &RC::pretrain, &flowmatch::PretrainConfig::lr),
      {"pretrain", "lr", [](RC& c, const std::string& v) { c.pretrain.lr.base = parse_double(v); },
       [](const RC& c) { return fmt_double(c.pretrain.lr.base); }},
      {"pretrain", "lr_final", [](RC& c, const std::string& v) { c.pretrain.lr.final = parse_double(v); },
       [](const RC& c) { return fmt_double(c.pretrain.lr.final); }},
      {"pretrain", "lr_warmup", [](RC& c, const std::string& v) { c.pretrain.lr.warmup = parse_uint(v); },
       [](const RC& c) { return std::to_string(c.pretrain.lr.warmup); }},
      {"pretrain", "lr_cycle", [](RC& c, const std::string& v) { c.pretrain.lr.cycle = parse_uint(v); },
       [](const RC& c) { return std::to_string(c.pretrain.lr.cycle); }},
      real("pretrain", "weight_decay", &RC::pretrain, &flowmatch::PretrainConfig::weight_decay),
      {"pretrain", "time_sampler",
       [](RC& c, const std::string& v) { c.pretrain.time_sampler.kind = flowmatch::time_sampler_from_string(v); },
       [](const RC& c) { return std::string(flowmatch::to_string(c.pretrain.time_sampler.kind)); }},
      {"pretrain", "beta_a", [](RC& c, const std::string& v) { c.pretrain.time_sampler.beta_a = parse_double(v); },
       [](const RC& c) { return fmt_double(c.pretrain.time_sampler.beta_a); }},
      {"pretrain", "beta_b", [](RC& c, const std::string& v) { c.pretrain.time_sampler.beta_b = parse_double(v); },
       [](const RC& c) { return fmt_double(c.pretrain.time_sampler.beta_b); }},
      {"pretrain", "logit_mean",
       [](RC& c, const std::string& v) { c.pretrain.time_sampler.logit_mean = parse_double(v); },
       [](const RC& c) { return fmt_double(c.pretrain.time_sampler.logit_mean); }},
      {"pretrain", "logit_std",
       [](RC& c, const std::string& v) { c.pretrain.time_sampler.logit_std = parse_double(v); },
       [](const RC& c) { return fmt_double(c.pretrain.time_sampler.logit_std); }},
      {"pretrain", "shortcut_max_steps",
       [](RC& c, const std::string& v) { c.pretrain.shortcut.max_steps = parse_uint(v); },
       [](const RC& c) { return std::to_string(c.pretrain.shortcut.max_steps); }},
      {"pretrain", "consistency_fraction",
       [](RC& c, const std::string& v) { c.pretrain.shortcut.consistency_fraction = parse_double(v); },
       [](const RC& c) { return fmt_double(c.pretrain.shortcut.consistency_fraction); }},

      // [finetune]
      top_string("finetune", "pretrained", &RC::pretrained_path),
      FT_COUNT("finetune", "n_envs", n_envs),
      FT_COUNT("finetune", "n_steps", n_steps),
      FT_COUNT("finetune", "iterations", iterations),
      FT_COUNT("finetune", "update_epochs", ppo.update_epochs),
      FT_COUNT("finetune", "minibatch_size", ppo.minibatch_size),
      FT_REAL("finetune", "clip_eps", ppo.clip_eps),
      FT_REAL("finetune", "gamma", ppo.gamma),
      FT_REAL("finetune", "gae_lambda", ppo.gae_lambda),
      FT_REAL("finetune", "target_kl", ppo.target_kl),
      FT_REAL("finetune", "critic_coef", ppo.critic_coef),
      FT_COUNT("finetune", "critic_warmup_iters", ppo.critic_warmup_iters),
      FT_BOOL("finetune", "normalize_advantages", ppo.normalize_advantages),
      FT_BOOL("finetune", "normalize_rewards", normalize_rewards),
      FT_REAL("finetune", "reward_scale", reward_scale),
      FT_REAL("finetune", "actor_weight_decay", actor_weight_decay),
      FT_REAL("finetune", "critic_weight_decay", critic_weight_decay),
      top_uint("finetune", "eval_episodes", &RC::eval_episodes),
      top_uint("finetune", "eval_seed", &RC::eval_seed),

      // [regularize]
      FT_REAL("regularize", "entropy_coef", reg.entropy_coef),
      FT_REAL("regularize", "w2_coef", reg.w2_coef),
      FT_COUNT("regularize", "w2_samples", reg.w2_samples),

      // [noise]
      real("noise", "sigma_min", &RC::noise, &stochpolicy::NoiseHeadConfig::sigma_min),
      real("noise", "sigma_max", &RC::noise, &stochpolicy::NoiseHeadConfig::sigma_max),
      {"noise", "conditioning",
       [](RC& c, const std::string& v) { c.noise.conditioning = stochpolicy::noise_conditioning_from_string(v); },
       [](const RC& c) { return std::string(stochpolicy::to_string(c.noise.conditioning)); }},
      {"noise", "hidden", [](RC& c, const std::string& v) { c.noise.hidden = parse_widths(v); },
       [](const RC& c) { return join_widths(c.noise.hidden); }},
      {"noise", "activation",
       [](RC& c, const std::string& v) { c.noise.activation = numerics::activation_from_string(v); },
       [](const RC& c) { return std::string(numerics::to_string(c.noise.activation)); }},
      FT_REAL("noise", "hold_fraction", noise.hold_fraction),
      FT_REAL("noise", "decay_mix", noise.decay_mix),

      // [schedule]
      lr_kind("schedule", "actor_lr_kind", &RC::finetune, &rlcore::FinetuneConfig::actor_lr),
      FT_REAL("schedule", "actor_lr", actor_lr.base),
      FT_REAL("schedule", "actor_lr_final", actor_lr.final),
      FT_COUNT("schedule", "actor_warmup", actor_lr.warmup),
      FT_COUNT("schedule", "actor_cycle", actor_lr.cycle),
      lr_kind("schedule", "critic_lr_kind", &RC::finetune, &rlcore::FinetuneConfig::critic_lr),
      FT_REAL("schedule", "critic_lr", critic_lr.base),
      FT_REAL("schedule", "critic_lr_final", critic_lr.final),
      FT_COUNT("schedule", "critic_warmup", critic_lr.warmup),
      FT_COUNT("schedule", "critic_cycle", critic_lr.cycle),

      // [logging]
      top_string("logging", "out_dir", &RC::out_dir),
      top_uint("logging", "flush_every", &RC::flush_every),
      top_uint("logging", "checkpoint_every", &RC::checkpoint_every),
      {"logging", "plot_columns", [](RC& c, const std::string& v) { c.plot_columns = split_list(v); },
       [](const RC& c) { return join(c.plot_columns); }},
  };
  return table;
}

const KeySpec& find_key(const std::string& section, const std::string& key) {
  for (const auto& k : key_table()) {
    if (section == k.section && key == k.key) return k;
  }
  throw ConfigError("unknown config key '" + section + "." + key + "'");
}

}  // namespace

void RunConfig::finalize() {
  env.validate();
  model.chunk_dim = env.chunk_dim();
  model.cond_dim = envsim::PointMassConfig::obs_dim();
  finetune.noise.total_iterations = finetune.iterations;
  if (denoising_steps == 0) throw ConfigError("model.denoising_steps must be positive");
  if (!(clip_bound > 0.0)) throw ConfigError("model.clip_bound must be positive");
  if (!(demo_eta >= 0.0)) throw ConfigError("env.demo_eta must be non-negative");
  if (demo_episodes == 0) throw ConfigError("env.demo_episodes must be positive");
  if (pretrain.steps == 0 || pretrain.batch_size == 0) throw ConfigError("pretrain.steps and batch_size must be positive");
  if (flush_every == 0) throw ConfigError("logging.flush_every must be positive");
  if (!(noise.sigma_min >= 0.0) || !(noise.sigma_max >= noise.sigma_min)) {
    throw ConfigError("noise.sigma_min and noise.sigma_max must satisfy 0 <= sigma_min <= sigma_max");
  }
  pretrain.time_sampler.validate();
  finetune.validate();
}

std::vector<ConfigKey> config_keys() {
  std::vector<ConfigKey> out;
  for (const auto& k : key_table()) out.push_back({k.section, k.key});
  return out;
}

std::string config_value(const RunConfig& config, const std::string& section, const std::string& key) {
  return find_key(section, key).get(config);
}

void set_config_value(RunConfig& config, const std::string& section, const std::string& key,
                      const std::string& value) {
  const auto& spec = find_key(section, key);
  try {
    spec.set(config, value);
  } catch (const ConfigError& e) {
    throw ConfigError("bad value for '" + section + "." + key + "': " + e.what());
  } catch (const std::exception& e) {
    throw ConfigError("bad value for '" + section + "." + key + "': " + e.what() + " (got '" + value + "')");
  }
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const auto& k : key_table()) known = known || section == k.section;
      if (!known) throw ConfigError("unknown config section '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
    set_config_value(cfg, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.finalize();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string resolved_config(const RunConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& k : key_table()) {
    if (section != k.section) {
      if (!section.empty()) out << '\n';
      section = k.section;
      out << '[' << section << "]\n";
    }
    out << k.key << " = " << k.get(config) << '\n';
  }
  return out.str();
}

}  // namespace reinflow::harness
