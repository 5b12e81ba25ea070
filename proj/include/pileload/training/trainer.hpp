#pragma once

#include <cstdint>
#include <vector>

#include "pileload/controllers/controller.hpp"
#include "pileload/dataset/dataset.hpp"

namespace pileload::train {

struct TrainConfig {
  std::size_t epochs = 150;
  std::size_t batch_size = 512;
  double lr = 0.001;
  double dropout_p = 0.35;
  std::uint64_t seed = 0;
  bool shuffle = true;
};

struct LossCurve {
  std::vector<double> train;  // sample-weighted mean minibatch loss, train mode
  std::vector<double> val;    // eval-mode MSE on the validation set, if one was given
};

struct TrainResult {
  ctl::ControllerParams params;
  LossCurve curve;
};

/// Normalized design matrices of a dataset for one controller spec.
struct DesignMatrices {
  nn::Matrix s;
  nn::Matrix s_att;
  nn::Matrix target;
};
DesignMatrices design_matrices(const data::Dataset& dataset, const ctl::ControllerSpec& spec,
                               const ctl::Normalization& norm);

/// Minibatch RAdam on the MSE objective. Normalization comes from the
/// training set and is stored in the returned params. Streams: init from
/// fork(1), shuffling from fork(2), dropout from fork(3) of Rng(seed).
TrainResult train(const ctl::ControllerSpec& spec, const data::Dataset& train_set,
                  const TrainConfig& config, const data::Dataset* val_set = nullptr);

/// Eval-mode MSE over the whole set using the params' own normalization.
double validate(const ctl::ControllerParams& params, const data::Dataset& dataset);

}  // namespace pileload::train
