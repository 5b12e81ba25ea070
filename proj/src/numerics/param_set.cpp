#include "pileload/numerics/param_set.hpp"

#include <stdexcept>

#include "pileload/errors.hpp"

namespace pileload::nn {

std::size_t ParamSet::add(std::string name, Matrix value) {
  if (value.empty()) throw ShapeError("parameter '" + name + "' is empty");
  if (find(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  grads_.emplace_back(value.rows(), value.cols(), 0.0);
  values_.push_back(std::move(value));
  names_.push_back(std::move(name));
  return values_.size() - 1;
}

std::optional<std::size_t> ParamSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

void ParamSet::zero_grad() {
  for (auto& g : grads_) g.fill(0.0);
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

double& ParamSet::scalar(std::size_t flat_index) {
  for (auto& v : values_) {
    if (flat_index < v.size()) return v.data()[flat_index];
    flat_index -= v.size();
  }
  throw std::out_of_range("ParamSet::scalar index past the last parameter");
}

}  // namespace pileload::nn
