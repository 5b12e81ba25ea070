#include "pileload/numerics/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

#include "pileload/errors.hpp"

namespace pileload::nn {

std::vector<Matrix> finite_diff_grad(const std::function<double()>& loss, ParamSet& params,
                                     double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = params.value(i);
    Matrix g(p.rows(), p.cols());
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double saved = p.data()[k];
      p.data()[k] = saved + h;
      const double up = loss();
      p.data()[k] = saved - h;
      const double down = loss();
      p.data()[k] = saved;
      g.data()[k] = (up - down) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

GradCheckReport compare_gradients(const ParamSet& params, const std::vector<Matrix>& numeric,
                                  double floor) {
  if (numeric.size() != params.size()) {
    throw ShapeError("compare_gradients: tensor count mismatch");
  }
  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& a = params.grad(i);
    const Matrix& n = numeric[i];
    if (!a.same_shape(n)) throw ShapeError("compare_gradients: shape mismatch");
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double av = a.data()[k];
      const double nv = n.data()[k];
      const double rel = std::abs(av - nv) / std::max(std::abs(av) + std::abs(nv), floor);
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_tensor = i;
        report.worst_index = k;
      }
    }
  }
  return report;
}

}  // namespace pileload::nn
