#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pileload/controllers/signals.hpp"
#include "pileload/numerics/matrix.hpp"
#include "pileload/numerics/ops.hpp"
#include "pileload/numerics/param_set.hpp"
#include "pileload/numerics/rng.hpp"
#include "pileload/numerics/tape.hpp"

namespace pileload::ctl {

enum class ControllerKind { nnet, nnetv2, annet, dannet };

std::string_view to_string(ControllerKind kind);
/// Accepts nnet|nnetv2|annet|dannet (case-insensitive).
std::optional<ControllerKind> parse_kind(std::string_view name);

/// Architecture descriptor. Layer widths are fixed by `kind`:
///   NNET    s-5-u (tanh hidden)
///   NNETV2  s-200-200-10-u
///   ANNET   attention s_att-64-64-m with m the size of s, then NNETV2 on s*m
///   DANNET  attention s_att-64-64-<m, m_u>, u = tanh(m_u * F'(s*m))
///
/// Sensor channels are implied by the dimensions: input_dim 3 is
/// (theta1, theta2, p_d), 4 adds p_t. NNETV2 also accepts 6 and 7, the same
/// sets concatenated with (p_l, p_b, a). An attention input of input_dim + 3
/// appends (p_l, p_b, a) to s.
struct ControllerSpec {
  ControllerKind kind = ControllerKind::nnetv2;
  std::size_t input_dim = 4;
  std::optional<std::size_t> attention_input_dim;
  double dropout_p = 0.35;

  /// Spec for the given sensor configuration; `extended` means the extra
  /// signals go to the attention head (or are concatenated for NNETV2).
  static ControllerSpec make(ControllerKind kind, bool use_pt, bool extended);

  bool has_attention() const {
    return kind == ControllerKind::annet || kind == ControllerKind::dannet;
  }
  /// Attention head width: input_dim (ANNET), input_dim + 3 (DANNET), 0 otherwise.
  std::size_t mask_dim() const;
  /// Throws std::invalid_argument when the fields violate the invariants above.
  void validate() const;

  std::vector<std::size_t> input_channels() const;
  std::vector<std::size_t> attention_channels() const;
  /// Channels a controller reads; input channels are always a prefix.
  std::vector<std::size_t> feature_channels() const;

  friend bool operator==(const ControllerSpec&, const ControllerSpec&) = default;
};

/// Per-feature z-score statistics, aligned with ControllerSpec::feature_channels().
struct Normalization {
  std::vector<double> mean;
  std::vector<double> stddev;

  friend bool operator==(const Normalization&, const Normalization&) = default;
};

/// Controller F parameters (theta) and, for attention kinds, head A (psi).
struct ControllerParams {
  ControllerSpec spec;
  nn::ParamSet theta;
  nn::ParamSet psi;
  std::optional<Normalization> norm;

  std::size_t parameter_count() const { return theta.scalar_count() + psi.scalar_count(); }
  void zero_grad() {
    theta.zero_grad();
    psi.zero_grad();
  }
};

/// Kaiming-normal weights, zero biases.
ControllerParams build_controller(const ControllerSpec& spec, nn::Rng& rng);

/// Handles returned by the batched forward pass.
struct ForwardVars {
  nn::Tape::Var u;
  std::optional<nn::Tape::Var> mask;         // m, one column per input channel
  std::optional<nn::Tape::Var> output_mask;  // m_u, DANNET only
};

/// Records one forward pass on `tape`. `s` holds normalized controller inputs
/// (one row per sample); `s_att` the normalized attention inputs (ignored for
/// plain kinds). With `track_grad` the parameters are bound with their
/// gradient buffers so tape.backward() fills them.
ForwardVars record_forward(nn::Tape& tape, ControllerParams& params, nn::Tape::Var s,
                           nn::Tape::Var s_att, nn::Mode mode, nn::Rng& rng, bool track_grad);

// Single-sample, eval-mode entry points on already-normalized vectors.

ControlVector forward_plain(const ControllerParams& params, std::span<const double> s);
/// Full softmax-normalized attention output (m, or <m, m_u> for DANNET).
nn::Vector attention_forward(const ControllerParams& params, std::span<const double> s_att);
ControlVector forward_annet(const ControllerParams& params, std::span<const double> s,
                            std::span<const double> s_att);

struct DualAttentionOutput {
  ControlVector u{};
  nn::Vector mask;
  std::array<double, kControlDims> output_mask{};
};
DualAttentionOutput forward_dannet(const ControllerParams& params, std::span<const double> s,
                                   std::span<const double> s_att);

/// Training batch: normalized inputs and target controls, one row per sample.
struct Batch {
  nn::Matrix s;
  nn::Matrix s_att;
  nn::Matrix target;
};

/// MSE of the controller's prediction. With `backward`, gradients w.r.t.
/// theta and psi are accumulated into the parameter buffers.
double controller_loss(ControllerParams& params, const Batch& batch, nn::Mode mode, nn::Rng& rng,
                       bool backward);

/// Result of running a controller on one raw observation.
struct Action {
  ControlVector u{};
  std::optional<nn::Vector> mask;
  std::optional<std::array<double, kControlDims>> output_mask;
};

/// Picks the spec's channels from a raw observation and z-scores them
/// (identity when params.norm is empty).
std::vector<double> normalized_features(const ControllerParams& params,
                                        const ExtendedSensorVector& raw);
/// Closed-loop entry point: normalize, run in eval mode, report masks.
Action act(const ControllerParams& params, const ExtendedSensorVector& raw);

}  // namespace pileload::ctl
