#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pileload/controllers/controller.hpp"
#include "pileload/dataset/demonstration.hpp"
#include "pileload/numerics/rng.hpp"

namespace pileload::data {

enum class Variant { d1, d2 };

std::string_view to_string(Variant v);
/// Accepts d1|d2 (also D_I, D_II).
std::optional<Variant> parse_variant(std::string_view name);

struct DatasetSpec {
  Variant variant = Variant::d1;
  double ideal_fill_threshold = 0.99;
  /// Only used by D_II; D_I keeps the native rate.
  double target_rate_hz = 20.0;

  static DatasetSpec d1() { return {Variant::d1, 0.99, 20.0}; }
  static DatasetSpec d2() { return {Variant::d2, 0.99, 20.0}; }
};

inline constexpr double kStdFloor = 1e-8;

/// Per-channel mean and population standard deviation, floored at kStdFloor.
struct NormStats {
  std::array<double, kSensorChannels> mean{};
  std::array<double, kSensorChannels> stddev{};

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

struct Sample {
  ExtendedSensorVector s{};
  ControlVector u{};

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Flattened observation-action pairs. Samples of demo i occupy
/// [demo_offsets[i], demo_offsets[i + 1]). Values are stored raw; `norm` is
/// computed from exactly these samples.
struct Dataset {
  Variant variant = Variant::d1;
  double rate_hz = 0.0;
  std::vector<std::string> demo_ids;
  std::vector<std::size_t> demo_offsets{0};
  std::vector<Sample> samples;
  NormStats norm;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

NormStats compute_norm_stats(const std::vector<Sample>& samples);

/// Flattens the demos as given (no filtering or decimation). All demos must
/// share a sample rate.
Dataset flatten(const std::vector<Demonstration>& demos, Variant variant);
/// D_I: all demos at native rate. D_II: filter_ideal, then decimate.
Dataset build_dataset(const std::vector<Demonstration>& demos, const DatasetSpec& spec);

/// Fraction of samples with exactly one |u_k| > epsilon.
double single_action_fraction(const Dataset& dataset, double epsilon = 0.05);

/// Demonstration-level split, deterministic in `rng`. The validation side
/// gets max(1, round(val_fraction * n)) demos; both sides recompute `norm`.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double val_fraction, nn::Rng& rng);

/// Normalization restricted to the spec's feature channels.
ctl::Normalization normalization_for(const NormStats& stats, const ctl::ControllerSpec& spec);

/// Manifest (key=value) plus samples.csv with raw values and a demo column.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);
std::string dataset_manifest(const Dataset& dataset);

}  // namespace pileload::data
