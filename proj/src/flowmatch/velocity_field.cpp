#include "reinflow/flowmatch/velocity_field.hpp"

#include <string>

#include "reinflow/errors.hpp"
#include "reinflow/numerics/embedding.hpp"

namespace reinflow::flowmatch {

VelocityField::VelocityField(MlpParams net, std::size_t chunk_dim, std::size_t cond_dim, std::size_t time_embed_dim,
                             bool shortcut)
    : net_(std::move(net)),
      chunk_dim_(chunk_dim),
      cond_dim_(cond_dim),
      time_embed_dim_(time_embed_dim),
      shortcut_(shortcut) {
  if (chunk_dim_ == 0) throw ConfigError("chunk dimension must be positive");
  if (time_embed_dim_ < 2 || time_embed_dim_ % 2 != 0) throw ConfigError("time embedding dim must be even and >= 2");
  const std::size_t expected = chunk_dim_ + cond_dim_ + time_embed_dim_ * (shortcut_ ? 2 : 1);
  if (net_.input_dim() != expected) {
    throw ConfigError("velocity net input width " + std::to_string(net_.input_dim()) + ", expected " +
                      std::to_string(expected));
  }
  if (net_.output_dim() != chunk_dim_) throw ConfigError("velocity net output width must equal chunk dim");
}

std::size_t VelocityField::input_width(const VelocityFieldConfig& c) {
  return c.chunk_dim + c.cond_dim + c.time_embed_dim * (c.shortcut ? 2 : 1);
}

VelocityField VelocityField::create(const VelocityFieldConfig& c, numerics::SeededRng& rng) {
  std::vector<std::size_t> widths{input_width(c)};
  widths.insert(widths.end(), c.hidden.begin(), c.hidden.end());
  widths.push_back(c.chunk_dim);
  return VelocityField(MlpParams::init(widths, c.activation, rng), c.chunk_dim, c.cond_dim, c.time_embed_dim,
                       c.shortcut);
}

namespace {

void fill_embedding_block(Matrix& in, Eigen::Index col, std::size_t dim, std::span<const double> values,
                          Eigen::Index rows) {
  if (values.size() != 1 && values.size() != static_cast<std::size_t>(rows)) {
    throw ConfigError("time/step vector must have one entry or one per row");
  }
  Vector buf(static_cast<Eigen::Index>(dim));
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (r == 0 || values.size() > 1) {
      numerics::sinusoidal_embed_into(values[values.size() == 1 ? 0 : static_cast<std::size_t>(r)], {buf.data(), dim});
    }
    in.block(r, col, 1, static_cast<Eigen::Index>(dim)) = buf.transpose();
  }
}

}  // namespace

Matrix VelocityField::assemble(const Matrix& x, const Matrix& cond, std::span<const double> t,
                               std::span<const double> step) const {
  const Eigen::Index rows = x.rows();
  if (static_cast<std::size_t>(x.cols()) != chunk_dim_) throw ConfigError("action chunk width mismatch");
  if (static_cast<std::size_t>(cond.cols()) != cond_dim_ || (cond_dim_ > 0 && cond.rows() != rows)) {
    throw ConfigError("condition shape mismatch");
  }
  Matrix in(rows, static_cast<Eigen::Index>(input_dim()));
  const auto cd = static_cast<Eigen::Index>(chunk_dim_);
  const auto od = static_cast<Eigen::Index>(cond_dim_);
  in.leftCols(cd) = x;
  if (od > 0) in.middleCols(cd, od) = cond;
  fill_embedding_block(in, cd + od, time_embed_dim_, t, rows);
  if (shortcut_) {
    if (step.empty()) throw ConfigError("shortcut field needs a step size");
    fill_embedding_block(in, cd + od + static_cast<Eigen::Index>(time_embed_dim_), time_embed_dim_, step, rows);
  }
  return in;
}

Matrix VelocityField::evaluate(const Matrix& x, const Matrix& cond, std::span<const double> t,
                               std::span<const double> step) const {
  return numerics::mlp_eval(net_, assemble(x, cond, t, step));
}

MlpForward VelocityField::forward(const Matrix& x, const Matrix& cond, std::span<const double> t,
                                  std::span<const double> step) const {
  return numerics::mlp_apply(net_, assemble(x, cond, t, step));
}

Matrix as_row(std::span<const double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

Matrix as_row(const Vector& v) { return v.transpose(); }

}  // namespace reinflow::flowmatch
