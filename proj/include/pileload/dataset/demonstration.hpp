#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pileload/controllers/signals.hpp"

namespace pileload::data {


struct Record {
  double t = 0.0;
  ExtendedSensorVector s{};
  ControlVector u{};
  double fill = 0.0;

  friend bool operator==(const Record&, const Record&) = default;
};

struct Demonstration {
  std::string id;
  double sample_rate_hz = 0.0;
  std::vector<Record> records;

  /// Fill of the last record (0 for an empty demonstration).
  double final_fill() const;
  /// Throws DataError on the first broken invariant: non-increasing or
  /// irregular time (1% tolerance), control outside [-1, 1], fill outside
  /// [0, 1], non-finite values.
  void validate() const;

  friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

inline constexpr const char* kDemoCsvHeader =
    "t_s,theta1_rad,theta2_rad,p_d_bar,p_t_bar,p_l_bar,p_b_bar,a_norm,u_theta1,u_theta2,u_g,fill";

std::string to_csv(const Demonstration& demo);
/// The sample rate is recovered from the timestamps; at least two rows are
/// needed. Errors name `id` and the 1-based data row.
Demonstration parse_demonstration_csv(const std::string& text, const std::string& id);

void write_demonstration(const Demonstration& demo, const std::filesystem::path& path);
Demonstration read_demonstration(const std::filesystem::path& path);

/// Every *.csv in `dir`, id = file stem, sorted by id.
std::vector<Demonstration> load_demonstrations(const std::filesystem::path& dir);
/// Writes <dir>/<id>.csv for each demo; creates `dir`.
void save_demonstrations(const std::vector<Demonstration>& demos, const std::filesystem::path& dir);

/// Keeps records 0, k, 2k, ... with k = sample_rate_hz / target_hz.
Demonstration decimate(const Demonstration& demo, double target_hz);
std::vector<Demonstration> filter_ideal(const std::vector<Demonstration>& demos, double threshold);

}  // namespace pileload::data
