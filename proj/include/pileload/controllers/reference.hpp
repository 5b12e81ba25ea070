#pragma once

#include <string>
#include <vector>

#include "pileload/controllers/controller.hpp"
#include "pileload/numerics/gradcheck.hpp"

namespace pileload::ctl {

/// Scalar long-double evaluation of the eval-mode controller loss. Shares no
/// code with the tape, so it serves as the finite-difference oracle.
long double reference_loss(const ControllerParams& params, const Batch& batch);

struct ControllerGradCheck {
  nn::GradCheckReport theta;
  nn::GradCheckReport psi;
  double max_rel_error = 0.0;
  /// "<tensor>[<index>]" of the worst scalar.
  std::string worst;
  std::size_t checked = 0;
};

/// Central differences of reference_loss (step h, extended precision) against
/// the tape's backward pass for every scalar of theta and psi. Only the
/// layers downstream of each perturbed scalar are recomputed.
ControllerGradCheck check_gradients(ControllerParams& params, const Batch& batch, double h = 1e-6,
                                    double floor = 1e-7);

/// Random eval batch with s a prefix of s_att and targets in (-0.9, 0.9).
Batch random_batch(const ControllerSpec& spec, std::size_t rows, nn::Rng& rng);

}  // namespace pileload::ctl
