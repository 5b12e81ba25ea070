#pragma once

#include <span>

#include "pileload/numerics/matrix.hpp"
#include "pileload/numerics/rng.hpp"

namespace pileload::nn {

enum class Mode { train, eval };

// Single-vector forms of the layer primitives. The batched, differentiable
// versions live on Tape; these are used for inspection and as references.

/// y = W x + b. Throws ShapeError on mismatch.
Vector linear_forward(std::span<const double> x, const Matrix& weights,
                      std::span<const double> bias);
Vector relu(std::span<const double> x);
Vector tanh_op(std::span<const double> x);
/// Max-subtracted softmax. Throws on empty or non-finite input.
Vector softmax(std::span<const double> features);
/// Inverted dropout: survivors are scaled by 1/(1-p) so eval mode is the identity.
Vector dropout(std::span<const double> x, double p, Mode mode, Rng& rng);

/// (1/T) * sum_i ||pred_i - target_i||^2 with one sample per row.
double mse_loss(const Matrix& pred, const Matrix& target);

/// N(0, sqrt(2/cols)) entries; cols is the fan-in.
Matrix kaiming_init(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace pileload::nn
