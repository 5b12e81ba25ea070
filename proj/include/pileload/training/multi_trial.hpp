#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pileload/training/trainer.hpp"

namespace pileload::train {

struct MultiTrialResult {
  std::vector<std::uint64_t> seeds;
  std::vector<LossCurve> curves;  // by trial index
  std::vector<double> mean_val;   // per epoch
  std::vector<double> std_val;    // per epoch, sample standard deviation (n - 1)

  double final_mean() const { return mean_val.empty() ? 0.0 : mean_val.back(); }
  double final_std() const { return std_val.empty() ? 0.0 : std_val.back(); }
};

/// Seeds of trial i: Rng::derive_seed(master, i).
std::vector<std::uint64_t> trial_seeds(std::uint64_t master, std::size_t n_trials);

/// One training per seed (config.seed is replaced), all validated every
/// epoch on `val_set`. Needs at least two seeds. Trials may run on
/// `threads` workers; results are ordered by trial index.
MultiTrialResult multi_trial(const ctl::ControllerSpec& spec, const data::Dataset& train_set,
                             const data::Dataset& val_set, const TrainConfig& config,
                             const std::vector<std::uint64_t>& seeds, unsigned threads = 1);
MultiTrialResult multi_trial(const ctl::ControllerSpec& spec, const data::Dataset& train_set,
                             const data::Dataset& val_set, const TrainConfig& config,
                             std::size_t n_trials, unsigned threads = 1);

/// Per-epoch mean and sample std of the validation curves.
void aggregate(MultiTrialResult& result);

/// epoch,mean_val_mse,std_val_mse,trial_0,...
std::string multi_trial_csv(const MultiTrialResult& result);

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace pileload::train
