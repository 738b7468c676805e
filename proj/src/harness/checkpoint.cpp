#include "reinflow/harness/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "reinflow/errors.hpp"
#include "reinflow/stochpolicy/serialize.hpp"

namespace reinflow::harness {

namespace {

constexpr char kMagic[4] = {'R', 'F', 'C', 'K'};
constexpr std::uint64_t kMaxCount = std::uint64_t{1} << 32;

std::uint64_t read_count(numerics::BinaryReader& r) {
  const auto n = r.u64();
  if (n > kMaxCount) throw CheckpointError("corrupt length field in checkpoint");
  return n;
}

void write_doubles(numerics::BinaryWriter& w, const std::vector<double>& v) {
  w.u64(v.size());
  w.f64s(v);
}

std::vector<double> read_doubles(numerics::BinaryReader& r) { return r.f64s(read_count(r)); }

void write_bytes(numerics::BinaryWriter& w, const std::vector<std::uint8_t>& v) {
  w.u64(v.size());
  if (!v.empty()) w.bytes(v.data(), v.size());
}

std::vector<std::uint8_t> read_bytes(numerics::BinaryReader& r) {
  std::vector<std::uint8_t> v(read_count(r));
  if (!v.empty()) r.bytes(v.data(), v.size());
  return v;
}

void write_adam(numerics::BinaryWriter& w, const numerics::AdamState& a) {
  write_doubles(w, a.first_moment);
  write_doubles(w, a.second_moment);
  w.u64(a.step);
  w.f64(a.beta1);
  w.f64(a.beta2);
  w.f64(a.epsilon);
  w.f64(a.weight_decay);
}

numerics::AdamState read_adam(numerics::BinaryReader& r) {
  numerics::AdamState a;
  a.first_moment = read_doubles(r);
  a.second_moment = read_doubles(r);
  a.step = r.u64();
  a.beta1 = r.f64();
  a.beta2 = r.f64();
  a.epsilon = r.f64();
  a.weight_decay = r.f64();
  if (a.first_moment.size() != a.second_moment.size()) throw CheckpointError("corrupt optimizer state");
  return a;
}

void write_rng(numerics::BinaryWriter& w, const numerics::SeededRng& rng) { w.str(rng.serialize()); }

numerics::SeededRng read_rng(numerics::BinaryReader& r) {
  try {
    return numerics::SeededRng::deserialize(r.str());
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("corrupt RNG state: ") + e.what());
  }
}

void write_env_config(numerics::BinaryWriter& w, const envsim::PointMassConfig& c) {
  w.u8(c.task == envsim::TaskKind::Sparse ? 1 : 0);
  for (double x : {c.dt, c.v_max, c.arena, c.goal_range, c.start_range}) w.f64(x);
  w.u64(c.horizon);
  w.u64(c.chunk);
  for (double x : {c.obs_noise, c.success_radius, c.action_cost}) w.f64(x);
}

envsim::PointMassConfig read_env_config(numerics::BinaryReader& r) {
  envsim::PointMassConfig c;
  c.task = r.u8() != 0 ? envsim::TaskKind::Sparse : envsim::TaskKind::Dense;
  c.dt = r.f64();
  c.v_max = r.f64();
  c.arena = r.f64();
  c.goal_range = r.f64();
  c.start_range = r.f64();
  c.horizon = r.u64();
  c.chunk = r.u64();
  c.obs_noise = r.f64();
  c.success_radius = r.f64();
  c.action_cost = r.f64();
  return c;
}

void write_vec2(numerics::BinaryWriter& w, const Eigen::Vector2d& v) {
  w.f64(v.x());
  w.f64(v.y());
}

Eigen::Vector2d read_vec2(numerics::BinaryReader& r) {
  const double x = r.f64();
  const double y = r.f64();
  return {x, y};
}

}  // namespace

void write_checkpoint(numerics::BinaryWriter& w, const rlcore::TrainerState& s, std::uint64_t seed) {
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u64(seed);
  w.u64(s.iteration);
  stochpolicy::write_policy(w, s.policy, seed);
  stochpolicy::write_policy(w, s.reference, seed);
  numerics::write_mlp(w, s.critic.net);
  write_adam(w, s.actor_opt);
  write_adam(w, s.critic_opt);

  const auto& venv = s.venv;
  write_env_config(w, venv.config());
  w.u64(venv.size());
  w.u64(venv.total_steps());
  for (std::size_t e = 0; e < venv.size(); ++e) {
    const auto& st = venv.envs()[e].state();
    write_vec2(w, st.p);
    write_vec2(w, st.v);
    write_vec2(w, st.g);
    w.u64(st.tick);
    write_rng(w, venv.rngs()[e]);
    w.f64(venv.episode_returns()[e]);
    w.u8(venv.episode_success()[e]);
    const auto row = venv.observations().row(static_cast<Eigen::Index>(e));
    for (Eigen::Index j = 0; j < row.size(); ++j) w.f64(row(j));
  }
  w.u64(s.policy_streams.size());
  for (const auto& rng : s.policy_streams) write_rng(w, rng);
  write_rng(w, s.update_rng);

  w.f64(s.scaler.gamma());
  write_doubles(w, s.scaler.returns());
  write_bytes(w, s.scaler.pending_reset());
  w.f64(s.scaler.stats().mean);
  w.f64(s.scaler.stats().var);
  w.f64(s.scaler.stats().count);

  write_doubles(w, s.recent_returns);
  write_bytes(w, s.recent_successes);
}

rlcore::TrainerState read_checkpoint(numerics::BinaryReader& r, std::uint64_t* seed_out) {
  char magic[4];
  r.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) throw CheckpointError("not a fine-tuning checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t seed = r.u64();
  if (seed_out != nullptr) *seed_out = seed;
  const std::uint64_t iteration = r.u64();
  auto policy = stochpolicy::read_policy(r);
  auto reference = stochpolicy::read_policy(r);
  rlcore::Critic critic{numerics::read_mlp(r)};
  auto actor_opt = read_adam(r);
  auto critic_opt = read_adam(r);

  envsim::PointMassConfig env_cfg;
  try {
    env_cfg = read_env_config(r);
    env_cfg.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("corrupt env config in checkpoint: ") + e.what());
  }
  const auto n_envs = read_count(r);
  if (n_envs == 0) throw CheckpointError("checkpoint holds no environments");
  envsim::VecEnv venv(env_cfg, n_envs, 0);
  venv.total_steps_mut() = r.u64();
  for (std::size_t e = 0; e < n_envs; ++e) {
    envsim::PointMassState st;
    st.p = read_vec2(r);
    st.v = read_vec2(r);
    st.g = read_vec2(r);
    st.tick = r.u64();
    venv.envs()[e].set_state(st);
    venv.rngs()[e] = read_rng(r);
    venv.episode_returns()[e] = r.f64();
    venv.episode_success()[e] = r.u8();
    for (Eigen::Index j = 0; j < venv.observations_mut().cols(); ++j) {
      venv.observations_mut()(static_cast<Eigen::Index>(e), j) = r.f64();
    }
  }
  const auto n_streams = read_count(r);
  if (n_streams != n_envs) throw CheckpointError("checkpoint policy stream count does not match env count");
  std::vector<numerics::SeededRng> streams;
  for (std::size_t i = 0; i < n_streams; ++i) streams.push_back(read_rng(r));
  auto update_rng = read_rng(r);

  const double gamma = r.f64();
  rlcore::RewardScaler scaler(n_envs, gamma);
  scaler.returns_mut() = read_doubles(r);
  scaler.pending_reset() = read_bytes(r);
  scaler.stats_mut().mean = r.f64();
  scaler.stats_mut().var = r.f64();
  scaler.stats_mut().count = r.f64();
  if (scaler.returns().size() != n_envs || scaler.pending_reset().size() != n_envs) {
    throw CheckpointError("checkpoint reward scaler does not match env count");
  }
  auto recent_returns = read_doubles(r);
  auto recent_successes = read_bytes(r);
  if (recent_returns.size() != recent_successes.size()) throw CheckpointError("corrupt episode statistics");

  return rlcore::TrainerState{std::move(policy),   std::move(reference),      std::move(critic),
                              std::move(actor_opt), std::move(critic_opt),    std::move(venv),
                              std::move(streams),  std::move(update_rng),     std::move(scaler),
                              iteration,           std::move(recent_returns), std::move(recent_successes),
                              0,                   0,                         false};
}

void save_checkpoint(const std::filesystem::path& path, const rlcore::TrainerState& state, std::uint64_t seed) {
  std::ostringstream buf(std::ios::binary);
  numerics::BinaryWriter w(buf);
  write_checkpoint(w, state, seed);
  const std::string bytes = buf.str();
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

rlcore::TrainerState load_checkpoint(const std::filesystem::path& path, std::uint64_t* seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  numerics::BinaryReader r(in);
  auto state = read_checkpoint(r, seed);
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes after checkpoint in " + path.string());
  return state;
}

}  // namespace reinflow::harness
