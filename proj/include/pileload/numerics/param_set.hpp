#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pileload/numerics/matrix.hpp"

namespace pileload::nn {

/// Ordered collection of named parameter tensors, each paired with a
/// gradient buffer of identical shape. Iteration order is insertion order.
class ParamSet {
 public:
  std::size_t add(std::string name, Matrix value);

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  const std::string& name(std::size_t i) const { return names_.at(i); }
  Matrix& value(std::size_t i) { return values_.at(i); }
  const Matrix& value(std::size_t i) const { return values_.at(i); }
  Matrix& grad(std::size_t i) { return grads_.at(i); }
  const Matrix& grad(std::size_t i) const { return grads_.at(i); }

  std::optional<std::size_t> find(std::string_view name) const;

  void zero_grad();
  /// Total number of scalar parameters.
  std::size_t scalar_count() const;
  /// Flat access across all tensors in declared order.
  double& scalar(std::size_t flat_index);

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::vector<Matrix> grads_;
};

}  // namespace pileload::nn
