#include "pileload/dataset/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "pileload/errors.hpp"
#include "pileload/util/text.hpp"

namespace pileload::data {

namespace {

constexpr const char* kSamplesHeader =
    "demo,theta1_rad,theta2_rad,p_d_bar,p_t_bar,p_l_bar,p_b_bar,a_norm,u_theta1,u_theta2,u_g";

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& demo_indices) {
  Dataset out;
  out.variant = ds.variant;
  out.rate_hz = ds.rate_hz;
  for (std::size_t d : demo_indices) {
    out.demo_ids.push_back(ds.demo_ids[d]);
    out.samples.insert(out.samples.end(), ds.samples.begin() + ds.demo_offsets[d],
                       ds.samples.begin() + ds.demo_offsets[d + 1]);
    out.demo_offsets.push_back(out.samples.size());
  }
  out.norm = compute_norm_stats(out.samples);
  return out;
}

}  // namespace

std::string_view to_string(Variant v) { return v == Variant::d1 ? "d1" : "d2"; }

std::optional<Variant> parse_variant(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "d1" || lower == "d_i") return Variant::d1;
  if (lower == "d2" || lower == "d_ii") return Variant::d2;
  return std::nullopt;
}

NormStats compute_norm_stats(const std::vector<Sample>& samples) {
  NormStats st;
  if (samples.empty()) return st;
  const double n = static_cast<double>(samples.size());
  for (std::size_t c = 0; c < kSensorChannels; ++c) {
    double sum = 0.0;
    for (const Sample& s : samples) sum += s.s[c];
    const double mean = sum / n;
    double sq = 0.0;
    for (const Sample& s : samples) sq += (s.s[c] - mean) * (s.s[c] - mean);
    st.mean[c] = mean;
    st.stddev[c] = std::max(std::sqrt(sq / n), kStdFloor);
  }
  return st;
}

Dataset flatten(const std::vector<Demonstration>& demos, Variant variant) {
  Dataset ds;
  ds.variant = variant;
  for (const auto& d : demos) {
    if (ds.demo_ids.empty()) {
      ds.rate_hz = d.sample_rate_hz;
    } else if (d.sample_rate_hz != ds.rate_hz) {
      throw DataError("demo " + d.id + " has rate " + util::format_double(d.sample_rate_hz) +
                      " Hz, expected " + util::format_double(ds.rate_hz));
    }
    ds.demo_ids.push_back(d.id);
    for (const Record& r : d.records) ds.samples.push_back({r.s, r.u});
    ds.demo_offsets.push_back(ds.samples.size());
  }
  ds.norm = compute_norm_stats(ds.samples);
  return ds;
}

Dataset build_dataset(const std::vector<Demonstration>& demos, const DatasetSpec& spec) {
  if (demos.empty()) throw DataError("build_dataset: no demonstrations");
  std::vector<Demonstration> chosen;
  if (spec.variant == Variant::d1) {
    chosen = demos;
  } else {
    for (const auto& d : filter_ideal(demos, spec.ideal_fill_threshold)) {
      chosen.push_back(decimate(d, spec.target_rate_hz));
    }
  }
  Dataset ds = flatten(chosen, spec.variant);
  if (ds.empty()) {
    throw DataError("build_dataset: " + std::string(to_string(spec.variant)) +
                    " construction left no samples");
  }
  return ds;
}

double single_action_fraction(const Dataset& dataset, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("single_action_fraction: epsilon must be > 0");
  if (dataset.empty()) return 0.0;
  std::size_t single = 0;
  for (const Sample& s : dataset.samples) {
    const auto active = std::count_if(s.u.begin(), s.u.end(),
                                      [&](double u) { return std::abs(u) > epsilon; });
    if (active == 1) ++single;
  }
  return static_cast<double>(single) / static_cast<double>(dataset.size());
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double val_fraction, nn::Rng& rng) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("split: val_fraction must be in (0, 1)");
  }
  const std::size_t n = dataset.demo_ids.size();
  const auto n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n))));
  if (n < 2 || n_val >= n) {
    throw DataError("split: " + std::to_string(n) + " demonstrations are too few to split");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {subset(dataset, train), subset(dataset, val)};
}

ctl::Normalization normalization_for(const NormStats& stats, const ctl::ControllerSpec& spec) {
  ctl::Normalization norm;
  for (std::size_t c : spec.feature_channels()) {
    norm.mean.push_back(stats.mean[c]);
    norm.stddev.push_back(stats.stddev[c]);
  }
  return norm;
}

std::string dataset_manifest(const Dataset& dataset) {
  util::KeyValues kv;
  kv.set("variant", std::string(to_string(dataset.variant)));
  kv.set("rate_hz", dataset.rate_hz);
  kv.set("demos", std::to_string(dataset.demo_ids.size()));
  kv.set("samples", std::to_string(dataset.size()));
  std::string ids;
  std::string counts;
  for (std::size_t i = 0; i < dataset.demo_ids.size(); ++i) {
    if (i) {
      ids += ',';
      counts += ',';
    }
    ids += dataset.demo_ids[i];
    counts += std::to_string(dataset.demo_offsets[i + 1] - dataset.demo_offsets[i]);
  }
  kv.set("demo_ids", ids);
  kv.set("demo_samples", counts);
  std::string names;
  for (std::size_t c = 0; c < kSensorChannels; ++c) {
    if (c) names += ',';
    names += std::string(kChannelNames[c]);
  }
  kv.set("channels", names);
  kv.set("norm_mean", util::join_doubles({dataset.norm.mean.begin(), dataset.norm.mean.end()}));
  kv.set("norm_std", util::join_doubles({dataset.norm.stddev.begin(), dataset.norm.stddev.end()}));
  return kv.str();
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  util::write_file(dir / "manifest.txt", dataset_manifest(dataset));
  std::string csv = kSamplesHeader;
  csv += '\n';
  for (std::size_t d = 0; d < dataset.demo_ids.size(); ++d) {
    for (std::size_t i = dataset.demo_offsets[d]; i < dataset.demo_offsets[d + 1]; ++i) {
      const Sample& s = dataset.samples[i];
      csv += dataset.demo_ids[d];
      for (double v : s.s) csv += ',' + util::format_double(v);
      for (double v : s.u) csv += ',' + util::format_double(v);
      csv += '\n';
    }
  }
  util::write_file(dir / "samples.csv", csv);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto kv = util::KeyValues::load(dir / "manifest.txt");
  Dataset ds;
  const auto variant = parse_variant(kv.get("variant"));
  if (!variant) throw DataError("dataset manifest: unknown variant '" + kv.get("variant") + "'");
  ds.variant = *variant;
  ds.rate_hz = kv.get_double("rate_hz");

  const std::string text = util::read_file(dir / "samples.csv");
  const auto lines = util::split(text, '\n');
  if (lines.empty() || util::trim(lines[0]) != kSamplesHeader) {
    throw DataError("samples.csv: missing or wrong header");
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = util::trim(lines[i]);
    if (line.empty()) continue;
    const auto fields = util::split(line, ',');
    const std::string row = "samples.csv: row " + std::to_string(i) + ": ";
    if (fields.size() != 11) throw DataError(row + "expected 11 fields");
    const std::string id(fields[0]);
    if (ds.demo_ids.empty() || ds.demo_ids.back() != id) {
      if (!ds.demo_ids.empty()) ds.demo_offsets.push_back(ds.samples.size());
      ds.demo_ids.push_back(id);
    }
    Sample s;
    for (std::size_t c = 0; c < 10; ++c) {
      const auto v = util::parse_double(fields[c + 1]);
      if (!v || !std::isfinite(*v)) throw DataError(row + "malformed number");
      (c < 7 ? s.s[c] : s.u[c - 7]) = *v;
    }
    for (double u : s.u) {
      if (u < -1.0 || u > 1.0) throw DataError(row + "control outside [-1, 1]");
    }
    ds.samples.push_back(s);
  }
  if (!ds.demo_ids.empty()) ds.demo_offsets.push_back(ds.samples.size());
  if (ds.empty()) throw DataError("dataset " + dir.string() + " has no samples");
  if (std::to_string(ds.size()) != kv.get("samples")) {
    throw DataError("dataset manifest declares " + kv.get("samples") + " samples, found " +
                    std::to_string(ds.size()));
  }
  ds.norm = compute_norm_stats(ds.samples);
  return ds;
}

}  // namespace pileload::data
