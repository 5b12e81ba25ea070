#include "pileload/controllers/reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pileload/errors.hpp"

namespace pileload::ctl {

namespace {

using LD = long double;
using VecLD = std::vector<LD>;

enum class Act { none, relu, tanh };

struct Dense {
  std::size_t out = 0;
  std::size_t in = 0;
  VecLD w;
  VecLD b;
};

struct Stack {
  std::vector<Dense> layers;
  std::vector<Act> acts;
};

Stack to_stack(const nn::ParamSet& ps, std::vector<Act> acts) {
  Stack net;
  for (std::size_t l = 0; 2 * l + 1 < ps.size(); ++l) {
    const nn::Matrix& w = ps.value(2 * l);
    const nn::Matrix& b = ps.value(2 * l + 1);
    net.layers.push_back({w.rows(), w.cols(), VecLD(w.values().begin(), w.values().end()),
                          VecLD(b.values().begin(), b.values().end())});
  }
  net.acts = std::move(acts);
  return net;
}

LD activate(Act a, LD z) {
  switch (a) {
    case Act::relu:
      return z > 0 ? z : 0;
    case Act::tanh:
      return std::tanh(z);
    case Act::none:
      break;
  }
  return z;
}

VecLD affine(const Dense& d, const VecLD& x) {
  VecLD z(d.out);
  for (std::size_t i = 0; i < d.out; ++i) {
    LD acc = d.b[i];
    for (std::size_t j = 0; j < d.in; ++j) acc += d.w[i * d.in + j] * x[j];
    z[i] = acc;
  }
  return z;
}

// x[l] is the input of layer l, z[l] its pre-activation; x.back() is the output.
struct Trace {
  std::vector<VecLD> x;
  std::vector<VecLD> z;
};

Trace run(const Stack& net, VecLD input) {
  Trace t;
  t.x.push_back(std::move(input));
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    VecLD z = affine(net.layers[l], t.x.back());
    VecLD y(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) y[i] = activate(net.acts[l], z[i]);
    t.z.push_back(std::move(z));
    t.x.push_back(std::move(y));
  }
  return t;
}

// Network output with z[layer][row] of `base` shifted by dz.
VecLD rerun(const Stack& net, const Trace& base, std::size_t layer, std::size_t row, LD dz) {
  VecLD x = base.x[layer + 1];
  x[row] = activate(net.acts[layer], base.z[layer][row] + dz);
  for (std::size_t l = layer + 1; l < net.layers.size(); ++l) {
    VecLD z = affine(net.layers[l], x);
    for (LD& v : z) v = activate(net.acts[l], v);
    x = std::move(z);
  }
  return x;
}

VecLD softmax_ld(const VecLD& f, std::size_t begin, std::size_t count) {
  LD peak = f[begin];
  for (std::size_t j = begin; j < begin + count; ++j) peak = std::max(peak, f[j]);
  VecLD m(count);
  LD total = 0;
  for (std::size_t j = 0; j < count; ++j) {
    m[j] = std::exp(f[begin + j] - peak);
    total += m[j];
  }
  for (LD& v : m) v /= total;
  return m;
}

struct Model {
  ControllerSpec spec;
  Stack f;
  Stack a;

  explicit Model(const ControllerParams& p) : spec(p.spec) {
    if (spec.kind == ControllerKind::nnet) {
      f = to_stack(p.theta, {Act::tanh, Act::none});
    } else {
      f = to_stack(p.theta, {Act::relu, Act::relu, Act::relu, Act::none});
    }
    if (spec.has_attention()) a = to_stack(p.psi, {Act::relu, Act::relu, Act::none});
  }
};

struct Sample {
  VecLD s;
  VecLD s_att;
  VecLD target;
};

// Masks derived from attention features.
struct Masks {
  VecLD m;
  VecLD m_u;
};

Masks masks_from(const Model& model, const VecLD& features) {
  const std::size_t in = model.spec.input_dim;
  Masks out;
  out.m = softmax_ld(features, 0, in);
  if (model.spec.kind == ControllerKind::dannet) out.m_u = softmax_ld(features, in, kControlDims);
  return out;
}

VecLD masked_input(const VecLD& s, const Masks& masks) {
  VecLD x = s;
  if (!masks.m.empty()) {
    for (std::size_t j = 0; j < x.size(); ++j) x[j] *= masks.m[j];
  }
  return x;
}

LD sample_loss(const VecLD& pre, const Masks& masks, const VecLD& target) {
  LD total = 0;
  for (std::size_t k = 0; k < kControlDims; ++k) {
    const LD gate = masks.m_u.empty() ? LD(1) : masks.m_u[k];
    const LD e = std::tanh(gate * pre[k]) - target[k];
    total += e * e;
  }
  return total;
}

struct BaseTrace {
  Trace a;
  Masks masks;
  Trace f;
  LD loss = 0;
};

BaseTrace evaluate(const Model& model, const Sample& smp) {
  BaseTrace t;
  if (model.spec.has_attention()) {
    t.a = run(model.a, smp.s_att);
    t.masks = masks_from(model, t.a.x.back());
  }
  t.f = run(model.f, masked_input(smp.s, t.masks));
  t.loss = sample_loss(t.f.x.back(), t.masks, smp.target);
  return t;
}

std::vector<Sample> to_samples(const Batch& batch) {
  std::vector<Sample> out;
  for (std::size_t r = 0; r < batch.s.rows(); ++r) {
    Sample smp;
    auto s = batch.s.row_span(r);
    smp.s.assign(s.begin(), s.end());
    if (!batch.s_att.empty()) {
      auto sa = batch.s_att.row_span(r);
      smp.s_att.assign(sa.begin(), sa.end());
    }
    auto t = batch.target.row_span(r);
    smp.target.assign(t.begin(), t.end());
    out.push_back(std::move(smp));
  }
  return out;
}

void check_batch(const ControllerParams& params, const Batch& batch) {
  const ControllerSpec& spec = params.spec;
  if (batch.s.empty()) throw std::invalid_argument("gradient check: empty batch");
  if (batch.s.cols() != spec.input_dim || batch.target.cols() != kControlDims ||
      batch.target.rows() != batch.s.rows()) {
    throw ShapeError("gradient check: batch does not match controller dims");
  }
  if (spec.has_attention() &&
      (batch.s_att.cols() != *spec.attention_input_dim || batch.s_att.rows() != batch.s.rows())) {
    throw ShapeError("gradient check: attention batch does not match controller dims");
  }
}

// Shift of the pre-activation touched by scalar k of tensor `index` in `net`.
struct Touch {
  std::size_t layer;
  std::size_t row;
  std::size_t col;
  bool is_weight;
};

Touch locate(const Stack& net, std::size_t index, std::size_t k) {
  const Dense& d = net.layers[index / 2];
  if (index % 2 == 0) return {index / 2, k / d.in, k % d.in, true};
  return {index / 2, k, 0, false};
}

std::vector<nn::Matrix> numeric_grad(const Model& model, const nn::ParamSet& ps, bool attention,
                                     const std::vector<Sample>& samples,
                                     const std::vector<BaseTrace>& base, LD h) {
  const Stack& net = attention ? model.a : model.f;
  std::vector<nn::Matrix> out;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    nn::Matrix g(ps.value(i).rows(), ps.value(i).cols());
    for (std::size_t k = 0; k < g.size(); ++k) {
      const Touch at = locate(net, i, k);
      LD diff = 0;
      for (std::size_t n = 0; n < samples.size(); ++n) {
        const BaseTrace& bt = base[n];
        const Trace& tr = attention ? bt.a : bt.f;
        const LD unit = at.is_weight ? tr.x[at.layer][at.col] : LD(1);
        LD side[2];
        for (int sgn = 0; sgn < 2; ++sgn) {
          const LD dz = (sgn == 0 ? h : -h) * unit;
          if (!attention) {
            side[sgn] = sample_loss(rerun(net, tr, at.layer, at.row, dz), bt.masks,
                                    samples[n].target);
          } else {
            const Masks masks = masks_from(model, rerun(net, tr, at.layer, at.row, dz));
            const Trace f = run(model.f, masked_input(samples[n].s, masks));
            side[sgn] = sample_loss(f.x.back(), masks, samples[n].target);
          }
        }
        diff += side[0] - side[1];
      }
      g.data()[k] = static_cast<double>(diff / (2 * h * static_cast<LD>(samples.size())));
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace

long double reference_loss(const ControllerParams& params, const Batch& batch) {
  check_batch(params, batch);
  const Model model(params);
  LD total = 0;
  for (const Sample& smp : to_samples(batch)) total += evaluate(model, smp).loss;
  return total / static_cast<LD>(batch.s.rows());
}

ControllerGradCheck check_gradients(ControllerParams& params, const Batch& batch, double h,
                                    double floor) {
  if (!(h > 0.0)) throw std::invalid_argument("gradient check: step must be positive");
  check_batch(params, batch);
  params.zero_grad();
  nn::Rng unused(0);
  controller_loss(params, batch, nn::Mode::eval, unused, true);

  const Model model(params);
  const auto samples = to_samples(batch);
  std::vector<BaseTrace> base;
  for (const Sample& smp : samples) base.push_back(evaluate(model, smp));

  ControllerGradCheck out;
  auto record = [&](const nn::ParamSet& ps, const nn::GradCheckReport& r) {
    out.checked += r.checked;
    if (r.checked > 0 && (out.worst.empty() || r.max_rel_error > out.max_rel_error)) {
      out.max_rel_error = r.max_rel_error;
      out.worst = ps.name(r.worst_tensor) + "[" + std::to_string(r.worst_index) + "]";
    }
  };
  out.theta = nn::compare_gradients(
      params.theta, numeric_grad(model, params.theta, false, samples, base, h), floor);
  record(params.theta, out.theta);
  if (params.psi.size() > 0) {
    out.psi = nn::compare_gradients(
        params.psi, numeric_grad(model, params.psi, true, samples, base, h), floor);
    record(params.psi, out.psi);
  }
  return out;
}

Batch random_batch(const ControllerSpec& spec, std::size_t rows, nn::Rng& rng) {
  const std::size_t feat = spec.feature_channels().size();
  Batch b{nn::Matrix(rows, spec.input_dim), nn::Matrix(rows, feat), nn::Matrix(rows, kControlDims)};
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < feat; ++c) {
      b.s_att(r, c) = rng.uniform(-1.5, 1.5);
      if (c < spec.input_dim) b.s(r, c) = b.s_att(r, c);
    }
    for (std::size_t c = 0; c < kControlDims; ++c) b.target(r, c) = rng.uniform(-0.9, 0.9);
  }
  return b;
}

}  // namespace pileload::ctl
