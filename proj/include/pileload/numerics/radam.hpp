#pragma once

#include <cstdint>
#include <vector>

#include "pileload/numerics/matrix.hpp"
#include "pileload/numerics/param_set.hpp"

namespace pileload::nn {

struct RadamState {
  std::uint64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

/// Zero moments shaped like `params`.
RadamState make_radam_state(const ParamSet& params, double beta1 = 0.9, double beta2 = 0.999,
                            double epsilon = 1e-8);

/// One rectified-Adam update using the gradients currently held in `params`.
///
/// The bias-corrected first moment is always applied. The variance-adaptive
/// term (with rectification factor r_t) is used only once the approximated
/// SMA length rho_t exceeds 4; before that the step is plain momentum.
/// lr = 0 is accepted and leaves the parameters untouched.
void radam_step(ParamSet& params, RadamState& state, double lr);

}  // namespace pileload::nn
