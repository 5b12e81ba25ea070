#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "pileload/numerics/matrix.hpp"
#include "pileload/numerics/ops.hpp"
#include "pileload/numerics/param_set.hpp"
#include "pileload/numerics/rng.hpp"

namespace pileload::nn {

/// Records a batched forward evaluation and replays it in reverse to
/// compute exact gradients of a scalar loss.
///
/// Activations are matrices with one sample per row. Parameters are bound by
/// reference; their gradients are accumulated into the caller's buffers
/// (normally ParamSet::grad) when backward() runs. The tape only supports
/// the handful of ops the controller architectures need.
class Tape {
 public:
  struct Var {
    std::size_t id;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Binds an external parameter. `grad` may be null for inference-only use;
  /// the referenced matrices must outlive the tape.
  Var parameter(const Matrix& value, Matrix* grad);
  Var parameter(ParamSet& params, std::size_t index) {
    return parameter(params.value(index), &params.grad(index));
  }
  Var parameter(const ParamSet& params, std::size_t index) {
    return parameter(params.value(index), nullptr);
  }

  /// x (B x in), weights (out x in), bias (out x 1) -> B x out.
  Var linear(Var x, Var weights, Var bias);
  Var relu(Var x);
  Var tanh(Var x);
  Var dropout(Var x, double p, Mode mode, Rng& rng);
  /// Softmax applied independently to every row.
  Var softmax_rows(Var x);
  Var hadamard(Var a, Var b);
  Var slice_cols(Var x, std::size_t begin, std::size_t count);
  /// Scalar (1x1) mean over rows of the squared row-wise L2 error.
  Var mse(Var pred, const Matrix& target);

  const Matrix& value(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  /// Propagates d(loss)/d(.) back through every recorded op. `loss` must be 1x1.
  void backward(Var loss);
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Matrix own;
    const Matrix* external = nullptr;
    Matrix* external_grad = nullptr;
    Matrix grad;
    bool requires_grad = false;
    std::function<void(Tape&, std::size_t)> backward;
  };

  Var push(Node node);
  Node& node(Var v) { return nodes_.at(v.id); }
  const Node& node(Var v) const { return nodes_.at(v.id); }
  /// Adds `delta` into the gradient slot of `target` (allocating it if needed).
  void accumulate(std::size_t target, Matrix&& delta);
  Matrix& grad_slot(std::size_t target);

  std::vector<Node> nodes_;
};

}  // namespace pileload::nn
