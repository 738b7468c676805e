#include "reinflow/envsim/point_mass.hpp"

#include <cmath>

#include "reinflow/errors.hpp"

namespace reinflow::envsim {

const char* to_string(TaskKind kind) { return kind == TaskKind::Dense ? "dense" : "sparse"; }

TaskKind task_kind_from_string(const std::string& name) {
  if (name == "dense") return TaskKind::Dense;
  if (name == "sparse") return TaskKind::Sparse;
  throw ConfigError("unknown env task '" + name + "' (expected dense or sparse)");
}

void PointMassConfig::validate() const {
  if (!(dt > 0.0) || !(v_max > 0.0) || !(arena > 0.0)) throw ConfigError("dt, v_max and arena must be positive");
  if (!(goal_range >= 0.0 && goal_range <= arena) || !(start_range >= 0.0 && start_range <= arena)) {
    throw ConfigError("goal_range and start_range must lie in [0, arena]");
  }
  if (horizon == 0 || chunk == 0) throw ConfigError("horizon and chunk must be positive");
  if (!(obs_noise >= 0.0)) throw ConfigError("obs_noise must be non-negative");
  if (!(success_radius > 0.0)) throw ConfigError("success_radius must be positive");
  if (!(action_cost >= 0.0)) throw ConfigError("action_cost must be non-negative");
}

double physics_tick(PointMassState& s, const Eigen::Vector2d& a, const PointMassConfig& c) {
  s.v = (s.v + a * c.dt).cwiseMax(-c.v_max).cwiseMin(c.v_max);
  s.p = (s.p + s.v * c.dt).cwiseMax(-c.arena).cwiseMin(c.arena);
  return -(s.p - s.g).norm() - c.action_cost * a.squaredNorm();
}

bool at_goal(const PointMassState& s, const PointMassConfig& c) { return (s.p - s.g).norm() < c.success_radius; }

PointMassEnv::PointMassEnv(PointMassConfig config) : config_(config) { config_.validate(); }

Vector PointMassEnv::observe(numerics::SeededRng& rng) const {
  Vector o(6);
  o << state_.p, state_.v, state_.g;
  if (config_.obs_noise > 0.0) {
    for (Eigen::Index i = 0; i < o.size(); ++i) o(i) += config_.obs_noise * rng.normal();
  }
  return o;
}

Vector PointMassEnv::reset(numerics::SeededRng& rng) {
  state_ = PointMassState{};
  const double s = config_.start_range;
  const double g = config_.goal_range;
  state_.p = {s * (2.0 * rng.uniform() - 1.0), s * (2.0 * rng.uniform() - 1.0)};
  state_.g = {g * (2.0 * rng.uniform() - 1.0), g * (2.0 * rng.uniform() - 1.0)};
  return observe(rng);
}

StepResult PointMassEnv::step_chunk(std::span<const double> chunk, numerics::SeededRng& rng) {
  if (chunk.size() != config_.chunk_dim()) throw ContractError("action chunk has the wrong length");
  for (double x : chunk) {
    if (!(std::abs(x) <= 1.0)) throw ContractError("action chunk coordinate outside [-1, 1]");
  }
  StepResult out;
  for (std::size_t i = 0; i < config_.chunk; ++i) {
    const Eigen::Vector2d a(chunk[2 * i], chunk[2 * i + 1]);
    const double dense = physics_tick(state_, a, config_);
    const bool reached = at_goal(state_, config_);
    if (config_.task == TaskKind::Dense) {
      out.reward += dense;
      out.success = out.success || reached;
    } else if (reached) {
      out.reward = 1.0;
      out.success = true;
      out.done = true;
      break;
    }
  }
  ++state_.tick;
  if (state_.tick >= config_.horizon) out.done = true;
  out.observation = observe(rng);
  return out;
}

}  // namespace reinflow::envsim
