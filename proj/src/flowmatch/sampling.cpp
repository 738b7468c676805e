#include "reinflow/flowmatch/sampling.hpp"

#include <cmath>
#include <numbers>

#include "reinflow/errors.hpp"

namespace reinflow::flowmatch {
namespace {

Matrix cond_rows(const Vector& cond, Eigen::Index rows) {
  Matrix c(rows, cond.size());
  for (Eigen::Index r = 0; r < rows; ++r) c.row(r) = cond.transpose();
  return c;
}

}  // namespace

double standard_normal_logpdf(const Vector& x) {
  return -0.5 * x.squaredNorm() - 0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi);
}

Matrix euler_sample_batch(const VelocityField& field, const Matrix& x0, const Matrix& cond,
                          const DiscretizationScheme& scheme) {
  Matrix x = x0;
  for (std::size_t k = 0; k < scheme.steps(); ++k) {
    const double t[] = {scheme.t(k)};
    const double dt[] = {scheme.dt(k)};
    Matrix v;
    try {
      v = field.evaluate(x, cond, t, dt);
    } catch (const NumericError&) {
      throw NumericError("non-finite velocity during Euler integration", static_cast<long>(k));
    }
    x += dt[0] * v;
    if (!x.allFinite()) throw NumericError("non-finite state during Euler integration", static_cast<long>(k));
  }
  return x;
}

Vector euler_sample(const VelocityField& field, const Vector& x0, const Vector& cond,
                    const DiscretizationScheme& scheme) {
  if (static_cast<std::size_t>(x0.size()) != field.chunk_dim()) throw ConfigError("x0 width must equal chunk dim");
  return euler_sample_batch(field, as_row(x0), as_row(cond), scheme).row(0).transpose();
}

Matrix velocity_jacobian(const VelocityField& field, const Vector& x, const Vector& cond, double t, double step) {
  const auto d = static_cast<Eigen::Index>(field.chunk_dim());
  const Matrix xs = cond_rows(x, d);
  const double ts[] = {t};
  const double steps[] = {step};
  auto fwd = field.forward(xs, cond_rows(cond, d), ts, steps);
  MlpParams scratch = field.net().zeros_like();
  // Row r of the input gradient is d v_r / d input.
  const Matrix grad_in = numerics::mlp_backward(field.net(), fwd.tape, Matrix::Identity(d, d), scratch);
  return grad_in.leftCols(d);
}

LogDensityEstimate exact_log_density(const VelocityField& field, const Vector& x0, const Vector& cond,
                                     const DiscretizationScheme& scheme, TraceMode mode, numerics::SeededRng& rng) {
  if (mode.kind == TraceMode::Kind::Hutchinson && mode.probes == 0) throw ConfigError("need at least one probe");
  const auto d = static_cast<Eigen::Index>(field.chunk_dim());
  if (x0.size() != d) throw ConfigError("x0 width must equal chunk dim");

  LogDensityEstimate est;
  est.log_p0 = standard_normal_logpdf(x0);
  double divergence_integral = 0.0;
  Vector x = x0;
  for (std::size_t k = 0; k < scheme.steps(); ++k) {
    const double t = scheme.t(k);
    const double dt = scheme.dt(k);
    double trace = 0.0;
    double se = 0.0;
    if (mode.kind == TraceMode::Kind::Exact) {
      trace = velocity_jacobian(field, x, cond, t, dt).trace();
    } else {
      const auto p = static_cast<Eigen::Index>(mode.probes);
      Matrix z(p, d);
      for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.rademacher();
      const double ts[] = {t};
      const double steps[] = {dt};
      auto fwd = field.forward(cond_rows(x, p), cond_rows(cond, p), ts, steps);
      MlpParams scratch = field.net().zeros_like();
      const Matrix zj = numerics::mlp_backward(field.net(), fwd.tape, z, scratch).leftCols(d);
      const Vector samples = (zj.array() * z.array()).rowwise().sum();
      trace = samples.mean();
      if (p > 1) {
        const double var = (samples.array() - trace).square().sum() / static_cast<double>(p - 1);
        se = std::sqrt(var / static_cast<double>(p));
      }
    }
    est.step_traces.push_back(trace);
    est.step_trace_se.push_back(se);
    divergence_integral += trace * dt;
    const double ts[] = {t};
    const double steps[] = {dt};
    x += dt * field.evaluate(as_row(x), as_row(cond), ts, steps).row(0).transpose();
    if (!x.allFinite()) throw NumericError("non-finite state during Euler integration", static_cast<long>(k));
  }
  est.x_final = x;
  est.log_p1 = est.log_p0 - divergence_integral;
  return est;
}

}  // namespace reinflow::flowmatch
