#include "pileload/training/multi_trial.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "pileload/util/text.hpp"

namespace pileload::train {

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<std::uint64_t> trial_seeds(std::uint64_t master, std::size_t n_trials) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < n_trials; ++i) seeds.push_back(nn::Rng::derive_seed(master, i));
  return seeds;
}

void aggregate(MultiTrialResult& result) {
  const std::size_t n = result.curves.size();
  if (n < 2) throw std::invalid_argument("multi_trial: needs at least two trials");
  const std::size_t epochs = result.curves.front().val.size();
  result.mean_val.assign(epochs, 0.0);
  result.std_val.assign(epochs, 0.0);
  for (std::size_t e = 0; e < epochs; ++e) {
    double sum = 0.0;
    for (const auto& c : result.curves) sum += c.val.at(e);
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& c : result.curves) ss += (c.val[e] - mean) * (c.val[e] - mean);
    result.mean_val[e] = mean;
    result.std_val[e] = std::sqrt(ss / static_cast<double>(n - 1));
  }
}

MultiTrialResult multi_trial(const ctl::ControllerSpec& spec, const data::Dataset& train_set,
                             const data::Dataset& val_set, const TrainConfig& config,
                             const std::vector<std::uint64_t>& seeds, unsigned threads) {
  if (seeds.size() < 2) throw std::invalid_argument("multi_trial: needs at least two trials");
  MultiTrialResult out;
  out.seeds = seeds;
  out.curves.resize(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t i) {
    TrainConfig cfg = config;
    cfg.seed = seeds[i];
    out.curves[i] = train(spec, train_set, cfg, &val_set).curve;
  });
  aggregate(out);
  return out;
}

MultiTrialResult multi_trial(const ctl::ControllerSpec& spec, const data::Dataset& train_set,
                             const data::Dataset& val_set, const TrainConfig& config,
                             std::size_t n_trials, unsigned threads) {
  return multi_trial(spec, train_set, val_set, config, trial_seeds(config.seed, n_trials), threads);
}

std::string multi_trial_csv(const MultiTrialResult& result) {
  std::string out = "epoch,mean_val_mse,std_val_mse";
  for (std::size_t i = 0; i < result.curves.size(); ++i) out += ",trial_" + std::to_string(i);
  out += "\n";
  for (std::size_t e = 0; e < result.mean_val.size(); ++e) {
    out += std::to_string(e + 1) + "," + util::format_double(result.mean_val[e]) + "," +
           util::format_double(result.std_val[e]);
    for (const auto& c : result.curves) out += "," + util::format_double(c.val[e]);
    out += "\n";
  }
  return out;
}

}  // namespace pileload::train
