#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

#include "reinflow/numerics/rng.hpp"

namespace reinflow::numerics {

// Row-major dense matrix; rows index batch samples throughout the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

enum class Activation { Mish, Tanh, Identity };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& name);

double mish(double x);
double mish_derivative(double x);

// Fully connected network. The activation is applied after every layer except
// the last, which is affine. widths = {in, h1, ..., out}; a zero input width is
// allowed and yields a net whose output is its last bias.
struct MlpParams {
  std::vector<std::size_t> widths;
  Activation activation = Activation::Mish;
  std::vector<Matrix> weights;     // layer l: widths[l] x widths[l+1]
  std::vector<RowVector> biases;   // layer l: widths[l+1]

  // Glorot-uniform weights, zero biases.
  static MlpParams init(std::vector<std::size_t> widths, Activation activation, SeededRng& rng);
  static MlpParams zeros(std::vector<std::size_t> widths, Activation activation);
  MlpParams zeros_like() const { return zeros(widths, activation); }

  std::size_t layers() const { return weights.size(); }
  std::size_t input_dim() const { return widths.front(); }
  std::size_t output_dim() const { return widths.back(); }
  std::size_t param_count() const;

  // Parameters in declaration order: W0, b0, W1, b1, ... (row-major).
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  void set_zero();
  void add_scaled(const MlpParams& other, double scale);
  bool same_shape(const MlpParams& other) const;
  bool bitwise_equal(const MlpParams& other) const;
  // Visit every parameter buffer in declaration order.
  template <typename F>
  void for_each_buffer(F&& f) {
    for (std::size_t l = 0; l < layers(); ++l) {
      f(std::span<double>(weights[l].data(), static_cast<std::size_t>(weights[l].size())));
      f(std::span<double>(biases[l].data(), static_cast<std::size_t>(biases[l].size())));
    }
  }
  template <typename F>
  void for_each_buffer(F&& f) const {
    for (std::size_t l = 0; l < layers(); ++l) {
      f(std::span<const double>(weights[l].data(), static_cast<std::size_t>(weights[l].size())));
      f(std::span<const double>(biases[l].data(), static_cast<std::size_t>(biases[l].size())));
    }
  }
};

// Activations kept by the forward pass. inputs[l] feeds layer l; preacts[l]
// is that layer's affine output.
struct MlpTape {
  std::vector<Matrix> inputs;
  std::vector<Matrix> preacts;
};

struct MlpForward {
  Matrix output;
  MlpTape tape;
};

// Batched forward pass (one sample per row).
MlpForward mlp_apply(const MlpParams& params, const Matrix& input);
// Forward without keeping a tape.
Matrix mlp_eval(const MlpParams& params, const Matrix& input);
// Single-sample convenience.
Vector mlp_apply(const MlpParams& params, std::span<const double> input);

// Reverse pass: accumulates dL/dparams into `grads` and returns dL/dinput.
Matrix mlp_backward(const MlpParams& params, const MlpTape& tape, const Matrix& grad_output, MlpParams& grads);

}  // namespace reinflow::numerics
