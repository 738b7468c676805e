#include "reinflow/numerics/mlp.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "reinflow/errors.hpp"

namespace reinflow::numerics {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Mish:
      return "mish";
    case Activation::Tanh:
      return "tanh";
    case Activation::Identity:
      return "identity";
  }
  return "?";
}

Activation activation_from_string(const std::string& name) {
  if (name == "mish") return Activation::Mish;
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + name + "'");
}

namespace {

// tanh(softplus(x)) = w / (w + 2) with w = e^x (e^x + 2); one exp per element.
// Above kMishLinear the activation is the identity to double precision.
constexpr double kMishLinear = 20.0;
using RowArray = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void apply_activation(Activation act, const Matrix& pre, Matrix& out) {
  switch (act) {
    case Activation::Identity:
      out = pre;
      return;
    case Activation::Tanh:
      out = pre.array().tanh().matrix();
      return;
    case Activation::Mish: {
      const auto x = pre.array();
      const RowArray n = x.min(kMishLinear).exp();
      const RowArray w = n * (n + 2.0);
      out = (x > kMishLinear).select(x, x * w / (w + 2.0)).matrix();
      return;
    }
  }
}

void activation_backward(Activation act, const Matrix& pre, Matrix& grad) {
  switch (act) {
    case Activation::Identity:
      return;
    case Activation::Tanh:
      grad.array() *= (1.0 - pre.array().tanh().square());
      return;
    case Activation::Mish: {
      const auto x = pre.array();
      const RowArray n = x.min(kMishLinear).exp();
      const RowArray w = n * (n + 2.0);
      const RowArray d = w + 2.0;
      // t + x (1 - t^2) sigmoid(x), with 1 - t^2 = 4 (w + 1) / (w + 2)^2
      const RowArray deriv = w / d + x * (4.0 * (w + 1.0) / (d * d)) * (n / (1.0 + n));
      grad.array() *= (x > kMishLinear).select(1.0, deriv);
      return;
    }
  }
}

void check_finite(const Matrix& m, std::size_t layer) {
  if (!m.allFinite()) throw NumericError("non-finite MLP activation", static_cast<long>(layer));
}

}  // namespace

double mish(double x) {
  if (x > kMishLinear) return x;
  const double n = std::exp(x);
  const double w = n * (n + 2.0);
  return x * w / (w + 2.0);
}

double mish_derivative(double x) {
  if (x > kMishLinear) return 1.0;
  const double n = std::exp(x);
  const double w = n * (n + 2.0);
  const double d = w + 2.0;
  return w / d + x * (4.0 * (w + 1.0) / (d * d)) * (n / (1.0 + n));
}

MlpParams MlpParams::zeros(std::vector<std::size_t> widths, Activation activation) {
  if (widths.size() < 2) throw ConfigError("MLP needs at least input and output widths");
  MlpParams p;
  p.widths = std::move(widths);
  p.activation = activation;
  for (std::size_t l = 0; l + 1 < p.widths.size(); ++l) {
    if (p.widths[l + 1] == 0) throw ConfigError("MLP layer width must be positive");
    p.weights.push_back(Matrix::Zero(static_cast<Eigen::Index>(p.widths[l]), static_cast<Eigen::Index>(p.widths[l + 1])));
    p.biases.push_back(RowVector::Zero(static_cast<Eigen::Index>(p.widths[l + 1])));
  }
  return p;
}

MlpParams MlpParams::init(std::vector<std::size_t> widths, Activation activation, SeededRng& rng) {
  MlpParams p = zeros(std::move(widths), activation);
  for (std::size_t l = 0; l < p.layers(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(p.widths[l] + p.widths[l + 1]));
    Matrix& w = p.weights[l];
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = limit * (2.0 * rng.uniform() - 1.0);
  }
  return p;
}

std::size_t MlpParams::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l] * widths[l + 1] + widths[l + 1];
  return n;
}

std::vector<double> MlpParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(param_count());
  for_each_buffer([&](std::span<const double> buf) { flat.insert(flat.end(), buf.begin(), buf.end()); });
  return flat;
}

void MlpParams::assign(std::span<const double> flat) {
  if (flat.size() != param_count()) throw ConfigError("parameter vector length mismatch");
  std::size_t offset = 0;
  for_each_buffer([&](std::span<double> buf) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), buf.size(), buf.begin());
    offset += buf.size();
  });
}

void MlpParams::set_zero() {
  for_each_buffer([](std::span<double> buf) { std::fill(buf.begin(), buf.end(), 0.0); });
}

bool MlpParams::same_shape(const MlpParams& other) const { return widths == other.widths; }

void MlpParams::add_scaled(const MlpParams& other, double scale) {
  if (!same_shape(other)) throw ConfigError("add_scaled: shape mismatch");
  for (std::size_t l = 0; l < layers(); ++l) {
    weights[l] += scale * other.weights[l];
    biases[l] += scale * other.biases[l];
  }
}

bool MlpParams::bitwise_equal(const MlpParams& other) const {
  if (!same_shape(other) || activation != other.activation) return false;
  const auto a = flatten();
  const auto b = other.flatten();
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

MlpForward mlp_apply(const MlpParams& params, const Matrix& input) {
  if (static_cast<std::size_t>(input.cols()) != params.input_dim()) {
    throw ConfigError("MLP input width " + std::to_string(input.cols()) + " != " + std::to_string(params.input_dim()));
  }
  MlpForward fwd;
  fwd.tape.inputs.reserve(params.layers());
  fwd.tape.preacts.reserve(params.layers());
  Matrix current = input;
  for (std::size_t l = 0; l < params.layers(); ++l) {
    Matrix pre = current * params.weights[l];
    pre.rowwise() += params.biases[l];
    fwd.tape.inputs.push_back(std::move(current));
    if (l + 1 == params.layers()) {
      current = pre;
    } else {
      apply_activation(params.activation, pre, current);
    }
    check_finite(current, l);
    fwd.tape.preacts.push_back(std::move(pre));
  }
  fwd.output = std::move(current);
  return fwd;
}

Matrix mlp_eval(const MlpParams& params, const Matrix& input) {
  if (static_cast<std::size_t>(input.cols()) != params.input_dim()) {
    throw ConfigError("MLP input width " + std::to_string(input.cols()) + " != " + std::to_string(params.input_dim()));
  }
  Matrix current = input;
  Matrix next;
  for (std::size_t l = 0; l < params.layers(); ++l) {
    Matrix pre = current * params.weights[l];
    pre.rowwise() += params.biases[l];
    if (l + 1 == params.layers()) {
      current = std::move(pre);
    } else {
      apply_activation(params.activation, pre, next);
      current.swap(next);
    }
    check_finite(current, l);
  }
  return current;
}

Vector mlp_apply(const MlpParams& params, std::span<const double> input) {
  Matrix row(1, static_cast<Eigen::Index>(input.size()));
  for (std::size_t i = 0; i < input.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = input[i];
  const Matrix out = mlp_eval(params, row);
  return out.row(0).transpose();
}

Matrix mlp_backward(const MlpParams& params, const MlpTape& tape, const Matrix& grad_output, MlpParams& grads) {
  if (!grads.same_shape(params)) throw ConfigError("gradient buffer shape mismatch");
  if (tape.inputs.size() != params.layers()) throw ConfigError("tape does not match network");
  Matrix grad = grad_output;
  for (std::size_t l = params.layers(); l-- > 0;) {
    if (l + 1 != params.layers()) activation_backward(params.activation, tape.preacts[l], grad);
    grads.weights[l].noalias() += tape.inputs[l].transpose() * grad;
    grads.biases[l] += grad.colwise().sum();
    Matrix next = grad * params.weights[l].transpose();
    grad.swap(next);
  }
  return grad;
}

}  // namespace reinflow::numerics
