#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "reinflow/numerics/mlp.hpp"

namespace reinflow::flowmatch {

using numerics::Matrix;
using numerics::MlpForward;
using numerics::MlpParams;
using numerics::Vector;

struct VelocityFieldConfig {
  std::size_t chunk_dim = 8;
  std::size_t cond_dim = 6;
  std::size_t time_embed_dim = 16;
  bool shortcut = false;
  std::vector<std::size_t> hidden = {64, 64};
  numerics::Activation activation = numerics::Activation::Mish;
};

// v_theta(t, x, cond[, step]) as one MLP over the concatenation
// [x | cond | embed(t) | embed(step)]. The step block exists only for
// shortcut models.
class VelocityField {
 public:
  VelocityField(MlpParams net, std::size_t chunk_dim, std::size_t cond_dim, std::size_t time_embed_dim,
                bool shortcut);

  static VelocityField create(const VelocityFieldConfig& config, numerics::SeededRng& rng);
  static std::size_t input_width(const VelocityFieldConfig& config);

  std::size_t chunk_dim() const { return chunk_dim_; }
  std::size_t cond_dim() const { return cond_dim_; }
  std::size_t time_embed_dim() const { return time_embed_dim_; }
  bool shortcut() const { return shortcut_; }
  std::size_t input_dim() const { return net_.input_dim(); }

  MlpParams& net() { return net_; }
  const MlpParams& net() const { return net_; }

  // `t` and `step` hold one entry per row, or a single entry broadcast to
  // every row. `step` is ignored unless shortcut() is true.
  Matrix assemble(const Matrix& x, const Matrix& cond, std::span<const double> t,
                  std::span<const double> step = {}) const;
  Matrix evaluate(const Matrix& x, const Matrix& cond, std::span<const double> t,
                  std::span<const double> step = {}) const;
  MlpForward forward(const Matrix& x, const Matrix& cond, std::span<const double> t,
                     std::span<const double> step = {}) const;

 private:
  MlpParams net_;
  std::size_t chunk_dim_;
  std::size_t cond_dim_;
  std::size_t time_embed_dim_;
  bool shortcut_;
};

// Convenience: a single row from a vector.
Matrix as_row(std::span<const double> v);
Matrix as_row(const Vector& v);

}  // namespace reinflow::flowmatch
