#pragma once

#include <cstddef>
#include <vector>

#include "reinflow/flowmatch/schemes.hpp"
#include "reinflow/flowmatch/velocity_field.hpp"

namespace reinflow::flowmatch {

// x_{k+1} = x_k + v(t_k, x_k, cond) * dt_k for k = 0..K-1. Shortcut fields
// receive dt_k as their step size.
Vector euler_sample(const VelocityField& field, const Vector& x0, const Vector& cond,
                    const DiscretizationScheme& scheme);
Matrix euler_sample_batch(const VelocityField& field, const Matrix& x0, const Matrix& cond,
                          const DiscretizationScheme& scheme);

struct TraceMode {
  enum class Kind { Exact, Hutchinson };
  Kind kind = Kind::Hutchinson;
  std::size_t probes = 1;

  static TraceMode exact() { return {Kind::Exact, 0}; }
  static TraceMode hutchinson(std::size_t probes) { return {Kind::Hutchinson, probes}; }
};

struct LogDensityEstimate {
  double log_p0 = 0.0;
  double log_p1 = 0.0;
  Vector x_final;
  std::vector<double> step_traces;     // divergence estimate per Euler step
  std::vector<double> step_trace_se;   // Monte-Carlo standard error (0 in exact mode)
};

// log p1(x_K) = log p0(x0) - sum_k tr[d v / d x](t_k, x_k) dt_k along the Euler
// path. Exact mode builds the full Jacobian with one reverse pass per output
// coordinate; Hutchinson mode averages z^T J z over Rademacher probes.
LogDensityEstimate exact_log_density(const VelocityField& field, const Vector& x0, const Vector& cond,
                                     const DiscretizationScheme& scheme, TraceMode mode, numerics::SeededRng& rng);

// Jacobian d v / d x at one point (chunk_dim x chunk_dim, row = output).
Matrix velocity_jacobian(const VelocityField& field, const Vector& x, const Vector& cond, double t, double step);

double standard_normal_logpdf(const Vector& x);

}  // namespace reinflow::flowmatch
