#include "pileload/numerics/ops.hpp"

#include <algorithm>
#include <cmath>

#include "pileload/errors.hpp"

namespace pileload::nn {

Vector linear_forward(std::span<const double> x, const Matrix& weights,
                      std::span<const double> bias) {
  if (x.size() != weights.cols() || bias.size() != weights.rows()) {
    throw ShapeError("linear_forward: x has " + std::to_string(x.size()) + " entries, W is " +
                     weights.shape_string() + ", b has " + std::to_string(bias.size()));
  }
  Vector y(bias.begin(), bias.end());
  for (std::size_t i = 0; i < weights.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < weights.cols(); ++j) acc += weights(i, j) * x[j];
    y[i] += acc;
  }
  return y;
}

Vector relu(std::span<const double> x) {
  Vector y(x.size());
  std::transform(x.begin(), x.end(), y.begin(), [](double v) { return v > 0.0 ? v : 0.0; });
  return y;
}

Vector tanh_op(std::span<const double> x) {
  Vector y(x.size());
  std::transform(x.begin(), x.end(), y.begin(), [](double v) { return std::tanh(v); });
  return y;
}

Vector softmax(std::span<const double> features) {
  if (features.empty()) throw ShapeError("softmax of an empty vector");
  for (double f : features) {
    if (!std::isfinite(f)) throw std::domain_error("softmax: non-finite feature");
  }
  const double peak = *std::max_element(features.begin(), features.end());
  Vector m(features.size());
  double total = 0.0;
  for (std::size_t j = 0; j < features.size(); ++j) {
    m[j] = std::exp(features[j] - peak);
    total += m[j];
  }
  for (double& v : m) v /= total;
  return m;
}

Vector dropout(std::span<const double> x, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("dropout probability must be in [0, 1), got " +
                                std::to_string(p));
  }
  Vector y(x.begin(), x.end());
  if (mode == Mode::eval || p == 0.0) return y;
  const double scale = 1.0 / (1.0 - p);
  for (double& v : y) v = rng.bernoulli(p) ? 0.0 : v * scale;
  return y;
}

double mse_loss(const Matrix& pred, const Matrix& target) {
  if (pred.empty()) throw std::invalid_argument("mse_loss: empty batch");
  if (!pred.same_shape(target)) {
    throw ShapeError("mse_loss: prediction " + pred.shape_string() + " vs target " +
                     target.shape_string());
  }
  double total = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double d = pred.data()[k] - target.data()[k];
    total += d * d;
  }
  return total / static_cast<double>(pred.rows());
}

Matrix kaiming_init(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix w(rows, cols);
  const double stddev = std::sqrt(2.0 / static_cast<double>(cols));
  for (double& v : w.values()) v = stddev * rng.normal();
  return w;
}

}  // namespace pileload::nn
