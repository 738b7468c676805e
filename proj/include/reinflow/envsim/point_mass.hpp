#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <string>

#include "reinflow/numerics/mlp.hpp"
#include "reinflow/numerics/rng.hpp"

namespace reinflow::envsim {

using numerics::Vector;

enum class TaskKind { Dense, Sparse };

const char* to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& name);

struct PointMassConfig {
  TaskKind task = TaskKind::Dense;
  double dt = 0.1;
  double v_max = 2.0;
  double arena = 2.0;        // positions live in [-arena, arena]^2
  double goal_range = 1.0;   // goals drawn from [-goal_range, goal_range]^2
  double start_range = 1.0;  // start positions drawn from [-start_range, start_range]^2
  std::size_t horizon = 64;  // macro-steps per episode
  std::size_t chunk = 4;     // ticks per macro-step
  double obs_noise = 0.0;    // std of Gaussian noise added to observations
  double success_radius = 0.1;
  double action_cost = 0.01;

  void validate() const;
  std::size_t chunk_dim() const { return 2 * chunk; }
  static constexpr std::size_t obs_dim() { return 6; }
};

struct PointMassState {
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  Eigen::Vector2d v = Eigen::Vector2d::Zero();
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  std::size_t tick = 0;  // macro-steps taken in the current episode
};

struct StepResult {
  Vector observation;
  double reward = 0.0;
  bool done = false;
  bool success = false;
};

// One physics tick with acceleration `a`; returns the dense tick reward.
double physics_tick(PointMassState& state, const Eigen::Vector2d& a, const PointMassConfig& config);

bool at_goal(const PointMassState& state, const PointMassConfig& config);

class PointMassEnv {
 public:
  explicit PointMassEnv(PointMassConfig config = {});

  const PointMassConfig& config() const { return config_; }
  const PointMassState& state() const { return state_; }
  void set_state(const PointMassState& state) { state_ = state; }

  Vector reset(numerics::SeededRng& rng);
  // Runs `config.chunk` ticks. Chunk layout: [a0x, a0y, a1x, a1y, ...], every
  // coordinate in [-1, 1]; anything else throws ContractError.
  StepResult step_chunk(std::span<const double> chunk, numerics::SeededRng& rng);
  Vector observe(numerics::SeededRng& rng) const;

 private:
  PointMassConfig config_;
  PointMassState state_;
};

}  // namespace reinflow::envsim
