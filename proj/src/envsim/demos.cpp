#include "reinflow/envsim/demos.hpp"

#include <fstream>
#include "json.hpp"

#include "reinflow/errors.hpp"

namespace reinflow::envsim {

double DemoSet::mean_return() const {
  if (episode_returns.empty()) return 0.0;
  double s = 0.0;
  for (double r : episode_returns) s += r;
  return s / static_cast<double>(episode_returns.size());
}

double DemoSet::success_rate() const {
  if (episode_successes.empty()) return 0.0;
  double s = 0.0;
  for (auto r : episode_successes) s += r;
  return s / static_cast<double>(episode_successes.size());
}

DemoSet generate_demos(const PointMassConfig& config, double eta, std::size_t episodes, std::uint64_t seed,
                       const ExpertGains& gains) {
  if (episodes == 0) throw ConfigError("demo generation needs at least one episode");
  DemoSet out;
  out.data = flowmatch::FlowDataset(config.chunk_dim(), PointMassConfig::obs_dim());
  out.task = config.task;
  out.eta = eta;
  out.seed = seed;
  PointMassEnv env(config);
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    numerics::SeededRng env_rng(seed, ep);
    numerics::SeededRng noise_rng(seed, (std::uint64_t{1} << 32) + ep);
    Vector obs = env.reset(env_rng);
    double ret = 0.0;
    bool success = false;
    for (;;) {
      const Vector chunk = scripted_expert(env.state(), config, eta, noise_rng, gains);
      out.data.append({chunk.data(), static_cast<std::size_t>(chunk.size())},
                      {obs.data(), static_cast<std::size_t>(obs.size())});
      const StepResult r = env.step_chunk({chunk.data(), static_cast<std::size_t>(chunk.size())}, env_rng);
      ret += r.reward;
      success = success || r.success;
      obs = r.observation;
      if (r.done) break;
    }
    out.episode_returns.push_back(ret);
    out.episode_successes.push_back(success ? 1 : 0);
  }
  return out;
}

void write_demos(const std::filesystem::path& path, const DemoSet& demos) {
  flowmatch::write_dataset(path, demos.data);
  nlohmann::json manifest = {
      {"env", to_string(demos.task)},
      {"eta", demos.eta},
      {"episodes", demos.episodes()},
      {"seed", demos.seed},
      {"records", demos.data.size()},
      {"mean_return", demos.mean_return()},
      {"success_rate", demos.success_rate()},
  };
  std::ofstream out(path.string() + ".json");
  if (!out) throw ConfigError("cannot write demo manifest next to " + path.string());
  out << manifest.dump(2) << '\n';
}

}  // namespace reinflow::envsim
