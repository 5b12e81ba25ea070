#include "pileload/controllers/controller.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "pileload/errors.hpp"

namespace pileload::ctl {

using nn::Matrix;
using nn::Mode;
using nn::Tape;

namespace {

constexpr std::array<std::size_t, 3> kExtraAttentionChannels = {kPl, kPb, kPumpAngle};

std::vector<std::size_t> controller_widths(const ControllerSpec& spec) {
  if (spec.kind == ControllerKind::nnet) return {spec.input_dim, 5, kControlDims};
  return {spec.input_dim, 200, 200, 10, kControlDims};
}

std::vector<std::size_t> attention_widths(const ControllerSpec& spec) {
  return {*spec.attention_input_dim, 64, 64, spec.mask_dim()};
}

void add_layers(nn::ParamSet& ps, const std::string& prefix,
                const std::vector<std::size_t>& widths, nn::Rng& rng) {
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    ps.add(prefix + ".W" + std::to_string(l), nn::kaiming_init(widths[l + 1], widths[l], rng));
    ps.add(prefix + ".b" + std::to_string(l), Matrix(widths[l + 1], 1, 0.0));
  }
}

// Binds parameter tensors either with gradient buffers (training) or read-only.
class Binder {
 public:
  Binder(Tape& tape, const nn::ParamSet& ro, nn::ParamSet* rw) : tape_(tape), ro_(ro), rw_(rw) {}
  Tape::Var operator()(std::size_t i) const {
    return rw_ ? tape_.parameter(*rw_, i) : tape_.parameter(ro_, i);
  }
  Tape::Var layer(Tape::Var x, std::size_t l) const {
    return tape_.linear(x, (*this)(2 * l), (*this)(2 * l + 1));
  }

 private:
  Tape& tape_;
  const nn::ParamSet& ro_;
  nn::ParamSet* rw_;
};

// F up to (not including) the output tanh.
Tape::Var controller_preactivation(Tape& tape, const Binder& f, Tape::Var x, double p, Mode mode,
                                   nn::Rng& rng) {
  auto h = tape.dropout(tape.relu(f.layer(x, 0)), p, mode, rng);
  h = tape.dropout(tape.relu(f.layer(h, 1)), p, mode, rng);
  h = tape.relu(f.layer(h, 2));
  return f.layer(h, 3);
}

Tape::Var attention_features(Tape& tape, const Binder& a, Tape::Var x, double p, Mode mode,
                             nn::Rng& rng) {
  auto h = tape.dropout(tape.relu(a.layer(x, 0)), p, mode, rng);
  h = tape.dropout(tape.relu(a.layer(h, 1)), p, mode, rng);
  return a.layer(h, 2);
}

ForwardVars record_forward_impl(Tape& tape, const ControllerParams& params,
                                ControllerParams* trainable, Tape::Var s, Tape::Var s_att,
                                Mode mode, nn::Rng& rng) {
  const ControllerSpec& spec = params.spec;
  if (tape.value(s).cols() != spec.input_dim) {
    throw ShapeError("controller expects " + std::to_string(spec.input_dim) +
                     " inputs, got " + std::to_string(tape.value(s).cols()));
  }
  const Binder f(tape, params.theta, trainable ? &trainable->theta : nullptr);
  const double p = spec.dropout_p;

  if (spec.kind == ControllerKind::nnet) {
    auto h = tape.tanh(f.layer(s, 0));
    return {tape.tanh(f.layer(h, 1)), std::nullopt, std::nullopt};
  }
  if (spec.kind == ControllerKind::nnetv2) {
    return {tape.tanh(controller_preactivation(tape, f, s, p, mode, rng)), std::nullopt,
            std::nullopt};
  }

  if (tape.value(s_att).cols() != *spec.attention_input_dim) {
    throw ShapeError("attention head expects " + std::to_string(*spec.attention_input_dim) +
                     " inputs, got " + std::to_string(tape.value(s_att).cols()));
  }
  if (tape.value(s_att).rows() != tape.value(s).rows()) {
    throw ShapeError("sensor and attention batches differ in length");
  }
  const Binder a(tape, params.psi, trainable ? &trainable->psi : nullptr);
  auto features = attention_features(tape, a, s_att, p, mode, rng);

  if (spec.kind == ControllerKind::annet) {
    auto mask = tape.softmax_rows(features);
    auto u = tape.tanh(controller_preactivation(tape, f, tape.hadamard(s, mask), p, mode, rng));
    return {u, mask, std::nullopt};
  }

  auto mask = tape.softmax_rows(tape.slice_cols(features, 0, spec.input_dim));
  auto output_mask = tape.softmax_rows(tape.slice_cols(features, spec.input_dim, kControlDims));
  auto pre = controller_preactivation(tape, f, tape.hadamard(s, mask), p, mode, rng);
  return {tape.tanh(tape.hadamard(output_mask, pre)), mask, output_mask};
}

ControlVector to_control(const Matrix& row) {
  return {row(0, 0), row(0, 1), row(0, 2)};
}

// Eval-mode forward for one sample.
struct SingleResult {
  ControlVector u{};
  std::optional<nn::Vector> mask;
  std::optional<std::array<double, kControlDims>> output_mask;
};

SingleResult run_single(const ControllerParams& params, std::span<const double> s,
                        std::span<const double> s_att) {
  Tape tape;
  nn::Rng unused(0);
  auto sv = tape.constant(Matrix::row(s));
  auto av = params.spec.has_attention() ? tape.constant(Matrix::row(s_att)) : sv;
  const ForwardVars out = record_forward_impl(tape, params, nullptr, sv, av, Mode::eval, unused);
  SingleResult r;
  r.u = to_control(tape.value(out.u));
  if (out.mask) {
    auto m = tape.value(*out.mask).values();
    r.mask = nn::Vector(m.begin(), m.end());
  }
  if (out.output_mask) {
    const Matrix& mu = tape.value(*out.output_mask);
    r.output_mask = std::array<double, kControlDims>{mu(0, 0), mu(0, 1), mu(0, 2)};
  }
  return r;
}

}  // namespace

std::string_view to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::nnet:
      return "nnet";
    case ControllerKind::nnetv2:
      return "nnetv2";
    case ControllerKind::annet:
      return "annet";
    case ControllerKind::dannet:
      return "dannet";
  }
  return "unknown";
}

std::optional<ControllerKind> parse_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (auto k : {ControllerKind::nnet, ControllerKind::nnetv2, ControllerKind::annet,
                 ControllerKind::dannet}) {
    if (lower == to_string(k)) return k;
  }
  return std::nullopt;
}

ControllerSpec ControllerSpec::make(ControllerKind kind, bool use_pt, bool extended) {
  ControllerSpec spec;
  spec.kind = kind;
  spec.input_dim = use_pt ? 4 : 3;
  if (spec.has_attention()) {
    spec.attention_input_dim = spec.input_dim + (extended ? 3 : 0);
  } else if (extended) {
    if (kind == ControllerKind::nnet) {
      throw std::invalid_argument("extended attention sensors need an attention controller; "
                                  "nnet has no attention head or concatenation variant");
    }
    spec.input_dim += 3;
  }
  spec.validate();
  return spec;
}

std::size_t ControllerSpec::mask_dim() const {
  switch (kind) {
    case ControllerKind::annet:
      return input_dim;
    case ControllerKind::dannet:
      return input_dim + kControlDims;
    default:
      return 0;
  }
}

void ControllerSpec::validate() const {
  const bool base_dim = input_dim == 3 || input_dim == 4;
  if (kind == ControllerKind::nnetv2) {
    if (!base_dim && input_dim != 6 && input_dim != 7) {
      throw std::invalid_argument("nnetv2 input_dim must be 3, 4, 6 or 7");
    }
  } else if (!base_dim) {
    throw std::invalid_argument(std::string(to_string(kind)) + " input_dim must be 3 or 4");
  }
  if (!has_attention() && attention_input_dim) {
    throw std::invalid_argument(std::string(to_string(kind)) + " has no attention head");
  }
  if (has_attention()) {
    if (!attention_input_dim) throw std::invalid_argument("attention controller needs attention_input_dim");
    if (*attention_input_dim != input_dim && *attention_input_dim != input_dim + 3) {
      throw std::invalid_argument("attention_input_dim must equal input_dim or input_dim + 3");
    }
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw std::invalid_argument("dropout probability must be in [0, 1)");
  }
}

std::vector<std::size_t> ControllerSpec::input_channels() const {
  std::vector<std::size_t> ch = {kTheta1, kTheta2, kPd};
  if (input_dim == 4 || input_dim == 7) ch.push_back(kPt);
  if (input_dim >= 6) ch.insert(ch.end(), kExtraAttentionChannels.begin(), kExtraAttentionChannels.end());
  return ch;
}

std::vector<std::size_t> ControllerSpec::attention_channels() const {
  if (!attention_input_dim) return {};
  std::vector<std::size_t> ch = input_channels();
  if (*attention_input_dim == input_dim + 3) {
    ch.insert(ch.end(), kExtraAttentionChannels.begin(), kExtraAttentionChannels.end());
  }
  return ch;
}

std::vector<std::size_t> ControllerSpec::feature_channels() const {
  return has_attention() ? attention_channels() : input_channels();
}

ControllerParams build_controller(const ControllerSpec& spec, nn::Rng& rng) {
  spec.validate();
  ControllerParams params;
  params.spec = spec;
  add_layers(params.theta, "F", controller_widths(spec), rng);
  if (spec.has_attention()) add_layers(params.psi, "A", attention_widths(spec), rng);
  return params;
}

ForwardVars record_forward(Tape& tape, ControllerParams& params, Tape::Var s, Tape::Var s_att,
                           Mode mode, nn::Rng& rng, bool track_grad) {
  return record_forward_impl(tape, params, track_grad ? &params : nullptr, s, s_att, mode, rng);
}

ControlVector forward_plain(const ControllerParams& params, std::span<const double> s) {
  if (params.spec.has_attention()) {
    throw std::invalid_argument("forward_plain needs an nnet or nnetv2 controller");
  }
  return run_single(params, s, s).u;
}

nn::Vector attention_forward(const ControllerParams& params, std::span<const double> s_att) {
  if (!params.spec.has_attention()) {
    throw std::invalid_argument("attention_forward needs an attention controller");
  }
  if (s_att.size() != *params.spec.attention_input_dim) {
    throw ShapeError("attention head expects " + std::to_string(*params.spec.attention_input_dim) +
                     " inputs, got " + std::to_string(s_att.size()));
  }
  Tape tape;
  nn::Rng unused(0);
  const Binder a(tape, params.psi, nullptr);
  auto features = attention_features(tape, a, tape.constant(Matrix::row(s_att)),
                                     params.spec.dropout_p, Mode::eval, unused);
  const std::size_t in = params.spec.input_dim;
  nn::Vector out;
  if (params.spec.kind == ControllerKind::annet) {
    auto m = tape.value(tape.softmax_rows(features)).values();
    out.assign(m.begin(), m.end());
  } else {
    auto m = tape.value(tape.softmax_rows(tape.slice_cols(features, 0, in))).values();
    auto mu = tape.value(tape.softmax_rows(tape.slice_cols(features, in, kControlDims))).values();
    out.assign(m.begin(), m.end());
    out.insert(out.end(), mu.begin(), mu.end());
  }
  return out;
}

ControlVector forward_annet(const ControllerParams& params, std::span<const double> s,
                            std::span<const double> s_att) {
  if (params.spec.kind != ControllerKind::annet) {
    throw std::invalid_argument("forward_annet needs an annet controller");
  }
  return run_single(params, s, s_att).u;
}

DualAttentionOutput forward_dannet(const ControllerParams& params, std::span<const double> s,
                                   std::span<const double> s_att) {
  if (params.spec.kind != ControllerKind::dannet) {
    throw std::invalid_argument("forward_dannet needs a dannet controller");
  }
  SingleResult r = run_single(params, s, s_att);
  return {r.u, std::move(*r.mask), *r.output_mask};
}

double controller_loss(ControllerParams& params, const Batch& batch, Mode mode, nn::Rng& rng,
                       bool backward) {
  if (batch.s.empty()) throw std::invalid_argument("controller_loss: empty batch");
  Tape tape;
  auto s = tape.constant(batch.s);
  auto s_att = params.spec.has_attention() ? tape.constant(batch.s_att) : s;
  const ForwardVars out = record_forward(tape, params, s, s_att, mode, rng, backward);
  auto loss = tape.mse(out.u, batch.target);
  if (backward) tape.backward(loss);
  return tape.value(loss)(0, 0);
}

std::vector<double> normalized_features(const ControllerParams& params,
                                        const ExtendedSensorVector& raw) {
  const auto channels = params.spec.feature_channels();
  std::vector<double> f(channels.size());
  for (std::size_t j = 0; j < channels.size(); ++j) {
    f[j] = raw[channels[j]];
    if (params.norm) f[j] = (f[j] - params.norm->mean[j]) / params.norm->stddev[j];
  }
  return f;
}

Action act(const ControllerParams& params, const ExtendedSensorVector& raw) {
  const std::vector<double> f = normalized_features(params, raw);
  const std::span<const double> all(f);
  SingleResult r = run_single(params, all.first(params.spec.input_dim), all);
  return {r.u, std::move(r.mask), r.output_mask};
}

}  // namespace pileload::ctl
