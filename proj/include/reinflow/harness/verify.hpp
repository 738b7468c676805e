#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "reinflow/stochpolicy/policy.hpp"

namespace reinflow::harness {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Small policy used by the oracle checks: one hidden layer of `hidden` units
// in both heads, time embedding width 4.
stochpolicy::NoisyFlowPolicy make_probe_policy(std::size_t chunk_dim, std::size_t cond_dim, std::size_t steps,
                                               std::size_t hidden, double sigma_min, double sigma_max,
                                               double clip_bound, numerics::SeededRng& rng);

// Analytic gradients of every differentiable loss against central
// differences (h = 1e-6) over `seeds` random problems.
std::vector<CheckResult> gradient_checks(std::uint64_t seed, std::size_t seeds = 10, double tolerance = 1e-5);

// Stored chain log-probabilities against a direct per-transition Gaussian
// recomputation, K in {1, 2, 4, 8}.
std::vector<CheckResult> likelihood_checks(std::uint64_t seed, double tolerance = 1e-12);

struct BanditGradient {
  std::vector<double> score_function;  // Monte-Carlo estimate of grad J
  std::vector<double> score_se;
  std::vector<double> finite_diff;     // central differences of J with common random numbers
  std::vector<double> finite_diff_se;
  double worst_z = 0.0;                // max |sf - fd| / sqrt(se_sf^2 + se_fd^2)
};

// One-step bandit: constant observation, d = 1, reward -(a^K - 2)^2.
BanditGradient bandit_gradient(std::size_t steps, std::size_t rollouts, std::uint64_t seed);
std::vector<CheckResult> bandit_checks(std::uint64_t seed, std::size_t rollouts = 100000, double z_limit = 4.0);

// Everything above, in order.
std::vector<CheckResult> run_verify_suite(std::uint64_t seed);

}  // namespace reinflow::harness
