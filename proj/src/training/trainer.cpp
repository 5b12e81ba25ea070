#include "pileload/training/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "pileload/errors.hpp"
#include "pileload/numerics/radam.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace pileload::train {

namespace {

constexpr std::size_t kEvalChunk = 4096;

// Minibatch activations are a few hundred KB each; glibc would otherwise
// mmap and unmap them on every step.
void keep_buffers_on_heap() {
#if defined(__GLIBC__)
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
    return true;
  }();
  (void)once;
#endif
}

ctl::Batch gather(const DesignMatrices& dm, const std::size_t* rows, std::size_t count) {
  ctl::Batch b{nn::Matrix(count, dm.s.cols()), nn::Matrix(count, dm.s_att.cols()),
               nn::Matrix(count, kControlDims)};
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t r = rows[i];
    std::copy_n(dm.s.row_span(r).begin(), dm.s.cols(), b.s.row_span(i).begin());
    std::copy_n(dm.s_att.row_span(r).begin(), dm.s_att.cols(), b.s_att.row_span(i).begin());
    std::copy_n(dm.target.row_span(r).begin(), kControlDims, b.target.row_span(i).begin());
  }
  return b;
}

}  // namespace

DesignMatrices design_matrices(const data::Dataset& dataset, const ctl::ControllerSpec& spec,
                               const ctl::Normalization& norm) {
  if (dataset.empty()) throw DataError("design matrices of an empty dataset");
  const auto channels = spec.feature_channels();
  if (norm.mean.size() != channels.size() || norm.stddev.size() != channels.size()) {
    throw ShapeError("normalization covers " + std::to_string(norm.mean.size()) +
                     " channels, controller reads " + std::to_string(channels.size()));
  }
  const std::size_t n = dataset.size();
  DesignMatrices dm{nn::Matrix(n, spec.input_dim), nn::Matrix(n, channels.size()),
                    nn::Matrix(n, kControlDims)};
  for (std::size_t r = 0; r < n; ++r) {
    const data::Sample& smp = dataset.samples[r];
    for (std::size_t j = 0; j < channels.size(); ++j) {
      const double z = (smp.s[channels[j]] - norm.mean[j]) / norm.stddev[j];
      dm.s_att(r, j) = z;
      if (j < spec.input_dim) dm.s(r, j) = z;
    }
    for (std::size_t k = 0; k < kControlDims; ++k) dm.target(r, k) = smp.u[k];
  }
  return dm;
}

TrainResult train(const ctl::ControllerSpec& spec_in, const data::Dataset& train_set,
                  const TrainConfig& config, const data::Dataset* val_set) {
  if (train_set.empty()) throw DataError("train: empty training set");
  if (config.epochs == 0 || config.batch_size == 0) {
    throw std::invalid_argument("train: epochs and batch_size must be positive");
  }
  if (!(config.lr >= 0.0)) throw std::invalid_argument("train: lr must be >= 0");
  keep_buffers_on_heap();
  ctl::ControllerSpec spec = spec_in;
  spec.dropout_p = config.dropout_p;
  spec.validate();

  const nn::Rng root(config.seed);
  nn::Rng init_rng = root.fork(1);
  nn::Rng shuffle_rng = root.fork(2);
  nn::Rng dropout_rng = root.fork(3);

  TrainResult out;
  out.params = ctl::build_controller(spec, init_rng);
  out.params.norm = data::normalization_for(train_set.norm, spec);
  const DesignMatrices dm = design_matrices(train_set, spec, *out.params.norm);

  nn::RadamState theta_state = nn::make_radam_state(out.params.theta);
  nn::RadamState psi_state = nn::make_radam_state(out.params.psi);

  const std::size_t n = train_set.size();
  const std::size_t batch = std::min(config.batch_size, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) {
      for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle_rng.below(i + 1)]);
    }
    double weighted = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t count = std::min(batch, n - start);
      const ctl::Batch b = gather(dm, order.data() + start, count);
      out.params.zero_grad();
      const double loss = ctl::controller_loss(out.params, b, nn::Mode::train, dropout_rng, true);
      nn::radam_step(out.params.theta, theta_state, config.lr);
      if (out.params.psi.size() > 0) nn::radam_step(out.params.psi, psi_state, config.lr);
      weighted += loss * static_cast<double>(count);
    }
    out.curve.train.push_back(weighted / static_cast<double>(n));
    if (val_set) out.curve.val.push_back(validate(out.params, *val_set));
  }
  out.params.zero_grad();
  return out;
}

double validate(const ctl::ControllerParams& params, const data::Dataset& dataset) {
  if (dataset.empty()) throw DataError("validate: empty dataset");
  if (!params.norm) throw DataError("validate: controller has no normalization");
  const DesignMatrices dm = design_matrices(dataset, params.spec, *params.norm);
  ctl::ControllerParams local = params;
  nn::Rng unused(0);
  const std::size_t n = dataset.size();
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  double total = 0.0;
  for (std::size_t start = 0; start < n; start += kEvalChunk) {
    const std::size_t count = std::min(kEvalChunk, n - start);
    const ctl::Batch b = gather(dm, rows.data() + start, count);
    total += ctl::controller_loss(local, b, nn::Mode::eval, unused, false) *
             static_cast<double>(count);
  }
  return total / static_cast<double>(n);
}

}  // namespace pileload::train
