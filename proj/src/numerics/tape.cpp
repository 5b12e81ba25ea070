#include "pileload/numerics/tape.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pileload/errors.hpp"

namespace pileload::nn {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;

Map as_eigen(Matrix& m) {
  return Map(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}
ConstMap as_eigen(const Matrix& m) {
  return ConstMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                  static_cast<Eigen::Index>(m.cols()));
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": operand shapes " + a.shape_string() + " and " +
                     b.shape_string() + " differ");
  }
}

}  // namespace

Tape::Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Matrix& Tape::value(Var v) const {
  const Node& n = node(v);
  return n.external ? *n.external : n.own;
}

Matrix& Tape::grad_slot(std::size_t target) {
  Node& n = nodes_[target];
  if (n.external_grad) return *n.external_grad;
  if (n.grad.empty()) {
    const Matrix& v = n.external ? *n.external : n.own;
    n.grad = Matrix(v.rows(), v.cols(), 0.0);
  }
  return n.grad;
}

void Tape::accumulate(std::size_t target, Matrix&& delta) {
  Node& n = nodes_[target];
  if (!n.requires_grad) return;
  if (!n.external_grad && n.grad.empty()) {
    n.grad = std::move(delta);
    return;
  }
  as_eigen(grad_slot(target)) += as_eigen(delta);
}

Tape::Var Tape::constant(Matrix value) {
  Node n;
  n.own = std::move(value);
  return push(std::move(n));
}

Tape::Var Tape::parameter(const Matrix& value, Matrix* grad) {
  if (grad && !grad->same_shape(value)) {
    throw ShapeError("gradient buffer " + grad->shape_string() + " does not match parameter " +
                     value.shape_string());
  }
  Node n;
  n.external = &value;
  n.external_grad = grad;
  n.requires_grad = grad != nullptr;
  return push(std::move(n));
}

Tape::Var Tape::linear(Var x, Var weights, Var bias) {
  const Matrix& xv = value(x);
  const Matrix& wv = value(weights);
  const Matrix& bv = value(bias);
  if (xv.cols() != wv.cols() || bv.rows() != wv.rows() || bv.cols() != 1) {
    throw ShapeError("linear: input " + xv.shape_string() + ", weights " + wv.shape_string() +
                     ", bias " + bv.shape_string());
  }
  Matrix y(xv.rows(), wv.rows());
  auto ye = as_eigen(y);
  ye.noalias() = as_eigen(xv) * as_eigen(wv).transpose();
  ye.rowwise() += as_eigen(bv).col(0).transpose();

  Node n;
  n.own = std::move(y);
  n.requires_grad = node(x).requires_grad || node(weights).requires_grad ||
                    node(bias).requires_grad;
  n.backward = [x, weights, bias](Tape& t, std::size_t self) {
    const Matrix& dy = t.nodes_[self].grad;
    const Matrix& xv = t.value(x);
    const Matrix& wv = t.value(weights);
    if (t.nodes_[x.id].requires_grad) {
      Matrix dx(xv.rows(), xv.cols());
      as_eigen(dx).noalias() = as_eigen(dy) * as_eigen(wv);
      t.accumulate(x.id, std::move(dx));
    }
    if (t.nodes_[weights.id].requires_grad) {
      as_eigen(t.grad_slot(weights.id)).noalias() += as_eigen(dy).transpose() * as_eigen(xv);
    }
    if (t.nodes_[bias.id].requires_grad) {
      as_eigen(t.grad_slot(bias.id)).col(0) += as_eigen(dy).colwise().sum().transpose();
    }
  };
  return push(std::move(n));
}

Tape::Var Tape::relu(Var x) {
  Matrix y = value(x);
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  Node n;
  n.own = std::move(y);
  n.requires_grad = node(x).requires_grad;
  n.backward = [x](Tape& t, std::size_t self) {
    Matrix dx = std::move(t.nodes_[self].grad);
    const Matrix& xv = t.value(x);
    for (std::size_t k = 0; k < dx.size(); ++k) {
      if (!(xv.data()[k] > 0.0)) dx.data()[k] = 0.0;
    }
    t.accumulate(x.id, std::move(dx));
  };
  return push(std::move(n));
}

Tape::Var Tape::tanh(Var x) {
  Matrix y = value(x);
  for (double& v : y.values()) v = std::tanh(v);
  Node n;
  n.own = std::move(y);
  n.requires_grad = node(x).requires_grad;
  n.backward = [x](Tape& t, std::size_t self) {
    Matrix dx = std::move(t.nodes_[self].grad);
    const Matrix& yv = t.nodes_[self].own;
    for (std::size_t k = 0; k < dx.size(); ++k) {
      const double yk = yv.data()[k];
      dx.data()[k] *= 1.0 - yk * yk;
    }
    t.accumulate(x.id, std::move(dx));
  };
  return push(std::move(n));
}

Tape::Var Tape::dropout(Var x, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("dropout probability must be in [0, 1), got " +
                                std::to_string(p));
  }
  if (mode == Mode::eval || p == 0.0) return x;

  const Matrix& xv = value(x);
  Matrix mask(xv.rows(), xv.cols());
  const double scale = 1.0 / (1.0 - p);
  Matrix y = xv;
  for (std::size_t k = 0; k < y.size(); ++k) {
    mask.data()[k] = rng.bernoulli(p) ? 0.0 : scale;
    y.data()[k] *= mask.data()[k];
  }

  Node n;
  n.own = std::move(y);
  n.requires_grad = node(x).requires_grad;
  n.backward = [x, mask = std::move(mask)](Tape& t, std::size_t self) {
    Matrix dx = std::move(t.nodes_[self].grad);
    for (std::size_t k = 0; k < dx.size(); ++k) dx.data()[k] *= mask.data()[k];
    t.accumulate(x.id, std::move(dx));
  };
  return push(std::move(n));
}

Tape::Var Tape::softmax_rows(Var x) {
  const Matrix& xv = value(x);
  if (!xv.all_finite()) throw std::domain_error("softmax: non-finite feature");
  Matrix y(xv.rows(), xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    auto in = xv.row_span(r);
    auto out = y.row_span(r);
    const double peak = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      out[j] = std::exp(in[j] - peak);
      total += out[j];
    }
    for (double& v : out) v /= total;
  }
  Node n;
  n.own = std::move(y);
  n.requires_grad = node(x).requires_grad;
  n.backward = [x](Tape& t, std::size_t self) {
    const Matrix& dy = t.nodes_[self].grad;
    const Matrix& yv = t.nodes_[self].own;
    Matrix dx(yv.rows(), yv.cols());
    for (std::size_t r = 0; r < yv.rows(); ++r) {
      auto g = dy.row_span(r);
      auto s = yv.row_span(r);
      double dot = 0.0;
      for (std::size_t j = 0; j < s.size(); ++j) dot += g[j] * s[j];
      auto out = dx.row_span(r);
      for (std::size_t j = 0; j < s.size(); ++j) out[j] = s[j] * (g[j] - dot);
    }
    t.accumulate(x.id, std::move(dx));
  };
  return push(std::move(n));
}

Tape::Var Tape::hadamard(Var a, Var b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  require_same_shape("hadamard", av, bv);
  Matrix y = av;
  for (std::size_t k = 0; k < y.size(); ++k) y.data()[k] *= bv.data()[k];
  Node n;
  n.own = std::move(y);
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.backward = [a, b](Tape& t, std::size_t self) {
    const Matrix& dy = t.nodes_[self].grad;
    if (t.nodes_[a.id].requires_grad) {
      Matrix da = dy;
      const Matrix& bv = t.value(b);
      for (std::size_t k = 0; k < da.size(); ++k) da.data()[k] *= bv.data()[k];
      t.accumulate(a.id, std::move(da));
    }
    if (t.nodes_[b.id].requires_grad) {
      Matrix db = dy;
      const Matrix& av = t.value(a);
      for (std::size_t k = 0; k < db.size(); ++k) db.data()[k] *= av.data()[k];
      t.accumulate(b.id, std::move(db));
    }
  };
  return push(std::move(n));
}

Tape::Var Tape::slice_cols(Var x, std::size_t begin, std::size_t count) {
  const Matrix& xv = value(x);
  if (count == 0 || begin + count > xv.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " + xv.shape_string());
  }
  Matrix y(xv.rows(), count);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    std::copy_n(xv.row_span(r).begin() + static_cast<std::ptrdiff_t>(begin), count,
                y.row_span(r).begin());
  }
  Node n;
  n.own = std::move(y);
  n.requires_grad = node(x).requires_grad;
  n.backward = [x, begin, count](Tape& t, std::size_t self) {
    const Matrix& dy = t.nodes_[self].grad;
    Matrix& dx = t.grad_slot(x.id);
    for (std::size_t r = 0; r < dy.rows(); ++r) {
      for (std::size_t j = 0; j < count; ++j) dx(r, begin + j) += dy(r, j);
    }
  };
  return push(std::move(n));
}

Tape::Var Tape::mse(Var pred, const Matrix& target) {
  const Matrix& pv = value(pred);
  Node n;
  n.own = Matrix(1, 1, mse_loss(pv, target));
  n.requires_grad = node(pred).requires_grad;
  n.backward = [pred, target](Tape& t, std::size_t self) {
    const double upstream = t.nodes_[self].grad(0, 0);
    const Matrix& pv = t.value(pred);
    Matrix dp(pv.rows(), pv.cols());
    const double scale = 2.0 * upstream / static_cast<double>(pv.rows());
    for (std::size_t k = 0; k < dp.size(); ++k) {
      dp.data()[k] = scale * (pv.data()[k] - target.data()[k]);
    }
    t.accumulate(pred.id, std::move(dp));
  };
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  if (nodes_.empty()) throw std::logic_error("backward called without a recorded forward pass");
  const Matrix& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward needs a scalar loss, got " + lv.shape_string());
  }
  if (!node(loss).requires_grad) return;
  grad_slot(loss.id).fill(1.0);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
  }
}

}  // namespace pileload::nn
