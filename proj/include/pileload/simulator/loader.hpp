#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "pileload/controllers/signals.hpp"
#include "pileload/numerics/rng.hpp"

namespace pileload::sim {

/// Fixed machine constants. The model is a 1-D approach plus two joints and a
/// scalar fill; nothing here is calibrated against a real loader.
struct MachineParams {
  double v_max = 1.0;             // m/s
  double drive_accel = 1.5;       // m/s^2 at full throttle
  double brake_decel = 3.0;       // m/s^2 at full reverse command
  double load_resistance = 1.5;   // m/s^2 per unit internal load
  double boom_rate = 0.2;         // rad/s at |u_theta1| = 1
  double bucket_rate = 0.3;       // rad/s at |u_theta2| = 1
  double theta1_min = 0.0, theta1_max = 0.9;
  double theta2_min = 0.0, theta2_max = 1.2;
  double full_contact_depth = 0.2;  // m of penetration for full bucket contact
  double contact_fade_start = 0.45; // boom angle where the bucket starts leaving the pile
  double contact_fade_end = 0.75;   // boom angle where contact is lost
  double curl_fill_gain = 1.0;      // fill per rad of bucket curl in contact
  double lift_fill_gain = 2.0;      // fill per rad of boom lift in contact
  double lift_capacity_angle = 0.35; // boom angle that unlocks the lift share of capacity
  double substep = 1.0 / 500.0;     // s, integration step inside step()
};

inline constexpr double kControlPeriod = 1.0 / 3.0;

struct LoaderState {
  double x = 0.0;       // m to the pile face; negative once penetrated
  double v = 0.0;       // m/s, forward
  double theta1 = 0.0;  // boom, rad
  double theta2 = 0.0;  // bucket, rad
  double fill = 0.0;
  double internal_load = 0.0;

  friend bool operator==(const LoaderState&, const LoaderState&) = default;
};

struct ConditionProfile {
  std::string name;
  double slip = 0.0;
  double material_stiffness = 2.5;
  double pile_distance_min = 1.0;
  double pile_distance_max = 5.0;
  /// Per ExtendedSensorVector channel.
  std::array<double, kSensorChannels> sensor_noise_std{};
  double surface_drag = 1.5;  // 1/s

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  ConditionProfile without_noise() const;
};

/// summer (slip 0), winter_ice (slip 0.6), winter_snow (slip 0.3, stiffer pile).
ConditionProfile builtin_condition(const std::string& name);
std::vector<std::string> builtin_condition_names();
/// A built-in name or a path to a key=value profile file.
ConditionProfile resolve_condition(const std::string& name_or_path);
ConditionProfile load_condition(const std::filesystem::path& path);
std::string condition_to_text(const ConditionProfile& cond);

double curl_fraction(const LoaderState& s, const MachineParams& m = {});
/// 1 up to contact_fade_start, linear to 0 at contact_fade_end.
double contact_height_factor(double theta1, const MachineParams& m = {});

/// Advances by dt using ceil(dt / substep) equal substeps.
LoaderState step(const LoaderState& state, const ControlVector& u, const ConditionProfile& cond,
                 double dt = kControlPeriod, const MachineParams& m = {});

/// Noise-free sensor model. Slip only scales the drive pressure.
ExtendedSensorVector sense_clean(const LoaderState& state, const ConditionProfile& cond,
                                 const MachineParams& m = {});
ExtendedSensorVector sense(const LoaderState& state, const ConditionProfile& cond, nn::Rng& rng,
                           const MachineParams& m = {});

}  // namespace pileload::sim
