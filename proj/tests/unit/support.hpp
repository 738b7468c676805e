#pragma once

#include <filesystem>
#include <string>

#include "reinflow/numerics/mlp.hpp"
#include "reinflow/numerics/rng.hpp"

namespace reinflow::test {

inline numerics::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, numerics::SeededRng& rng,
                                      double scale = 1.0) {
  numerics::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

inline numerics::Vector random_vector(Eigen::Index n, numerics::SeededRng& rng, double scale = 1.0) {
  numerics::Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("reinflow_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace reinflow::test
