#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "reinflow/numerics/mlp.hpp"

namespace reinflow::flowmatch {

using ConstMatrixMap = Eigen::Map<const numerics::Matrix>;

// Target chunks x1 with their conditions; x0 is drawn fresh at training time.
class FlowDataset {
 public:
  FlowDataset(std::size_t chunk_dim, std::size_t cond_dim) : chunk_dim_(chunk_dim), cond_dim_(cond_dim) {}

  std::size_t size() const { return chunk_dim_ == 0 ? 0 : targets_.size() / chunk_dim_; }
  std::size_t chunk_dim() const { return chunk_dim_; }
  std::size_t cond_dim() const { return cond_dim_; }

  void append(std::span<const double> target, std::span<const double> condition);

  std::span<const double> target(std::size_t i) const { return {targets_.data() + i * chunk_dim_, chunk_dim_}; }
  std::span<const double> condition(std::size_t i) const { return {conditions_.data() + i * cond_dim_, cond_dim_}; }
  ConstMatrixMap targets() const;
  ConstMatrixMap conditions() const;

 private:
  std::size_t chunk_dim_;
  std::size_t cond_dim_;
  std::vector<double> targets_;
  std::vector<double> conditions_;
};

// Text format: header `chunk_dim,cond_dim,count`, then one record per line
// with the target followed by the condition, comma separated.
void write_dataset(const std::filesystem::path& path, const FlowDataset& data);
FlowDataset read_dataset(const std::filesystem::path& path);

}  // namespace reinflow::flowmatch
