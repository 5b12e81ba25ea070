#pragma once

#include <functional>
#include <vector>

#include "pileload/numerics/matrix.hpp"
#include "pileload/numerics/param_set.hpp"

namespace pileload::nn {

/// Central-difference estimate (L(p+h) - L(p-h)) / 2h for every scalar in
/// `params`. The loss is re-evaluated with each scalar perturbed in place;
/// values are restored afterwards. Result shapes mirror `params`.
std::vector<Matrix> finite_diff_grad(const std::function<double()>& loss, ParamSet& params,
                                     double h);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Relative error |a - n| / max(|a| + |n|, floor) per scalar, worst case reported.
GradCheckReport compare_gradients(const ParamSet& params, const std::vector<Matrix>& numeric,
                                  double floor = 1e-7);

}  // namespace pileload::nn
