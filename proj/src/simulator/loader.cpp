#include "pileload/simulator/loader.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pileload/errors.hpp"
#include "pileload/util/text.hpp"

namespace pileload::sim {

namespace {

constexpr std::array<double, kSensorChannels> kDefaultNoise = {0.002, 0.002, 0.5, 0.5,
                                                               0.5,   0.5,   0.005};

// Idle offsets and gains of the pressure model, bar.
constexpr double kPdIdle = 20.0, kPdSpeed = 10.0, kPdLoad = 60.0;
constexpr double kPtIdle = 30.0, kPtLoad = 80.0, kPtBoom = 15.0;
constexpr double kPlIdle = 40.0, kPlFill = 50.0, kPlLoad = 25.0;
constexpr double kPbIdle = 25.0, kPbFill = 35.0, kPbLoad = 40.0;

std::string noise_key(std::size_t c) { return "noise_" + std::string(kChannelNames[c]); }

}  // namespace

void ConditionProfile::validate() const {
  if (name.empty()) throw std::invalid_argument("condition: empty name");
  if (!(slip >= 0.0 && slip < 1.0)) throw std::invalid_argument("condition: slip must be in [0, 1)");
  if (!(material_stiffness > 0.0)) {
    throw std::invalid_argument("condition: material_stiffness must be positive");
  }
  if (!(pile_distance_min > 0.0 && pile_distance_min <= pile_distance_max) ||
      !std::isfinite(pile_distance_max)) {
    throw std::invalid_argument("condition: need 0 < pile_distance_min <= pile_distance_max");
  }
  if (!(surface_drag >= 0.0)) throw std::invalid_argument("condition: surface_drag must be >= 0");
  for (double n : sensor_noise_std) {
    if (!(n >= 0.0) || !std::isfinite(n)) {
      throw std::invalid_argument("condition: noise std must be finite and >= 0");
    }
  }
}

ConditionProfile ConditionProfile::without_noise() const {
  ConditionProfile c = *this;
  c.sensor_noise_std.fill(0.0);
  return c;
}

ConditionProfile builtin_condition(const std::string& name) {
  ConditionProfile c;
  c.name = name;
  c.sensor_noise_std = kDefaultNoise;
  if (name == "summer") return c;
  if (name == "winter_ice") {
    c.slip = 0.6;
    return c;
  }
  if (name == "winter_snow") {
    c.slip = 0.3;
    c.material_stiffness = 3.0;
    c.surface_drag = 2.0;
    return c;
  }
  throw std::invalid_argument("unknown condition '" + name +
                              "' (expected summer, winter_ice, winter_snow or a profile file)");
}

std::vector<std::string> builtin_condition_names() { return {"summer", "winter_ice", "winter_snow"}; }

ConditionProfile load_condition(const std::filesystem::path& path) {
  const auto kv = util::KeyValues::load(path);
  ConditionProfile c;
  c.name = kv.get("name");
  c.slip = kv.get_double("slip");
  c.material_stiffness = kv.get_double("material_stiffness");
  c.pile_distance_min = kv.get_double("pile_distance_min");
  c.pile_distance_max = kv.get_double("pile_distance_max");
  c.surface_drag = kv.get_double("surface_drag");
  for (std::size_t ch = 0; ch < kSensorChannels; ++ch) {
    c.sensor_noise_std[ch] = kv.has(noise_key(ch)) ? kv.get_double(noise_key(ch)) : 0.0;
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return c;
}

ConditionProfile resolve_condition(const std::string& name_or_path) {
  for (const auto& n : builtin_condition_names()) {
    if (n == name_or_path) return builtin_condition(n);
  }
  if (std::filesystem::is_regular_file(name_or_path)) return load_condition(name_or_path);
  return builtin_condition(name_or_path);
}

std::string condition_to_text(const ConditionProfile& c) {
  util::KeyValues kv;
  kv.set("name", c.name);
  kv.set("slip", c.slip);
  kv.set("material_stiffness", c.material_stiffness);
  kv.set("pile_distance_min", c.pile_distance_min);
  kv.set("pile_distance_max", c.pile_distance_max);
  kv.set("surface_drag", c.surface_drag);
  for (std::size_t ch = 0; ch < kSensorChannels; ++ch) kv.set(noise_key(ch), c.sensor_noise_std[ch]);
  return kv.str();
}

double curl_fraction(const LoaderState& s, const MachineParams& m) {
  return (s.theta2 - m.theta2_min) / (m.theta2_max - m.theta2_min);
}

double contact_height_factor(double theta1, const MachineParams& m) {
  if (theta1 <= m.contact_fade_start) return 1.0;
  if (theta1 >= m.contact_fade_end) return 0.0;
  return (m.contact_fade_end - theta1) / (m.contact_fade_end - m.contact_fade_start);
}

LoaderState step(const LoaderState& state, const ControlVector& u, const ConditionProfile& cond,
                 double dt, const MachineParams& m) {
  for (double c : u) {
    if (!std::isfinite(c)) throw std::invalid_argument("step: non-finite control");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  const auto n = static_cast<int>(std::max(1.0, std::ceil(dt / m.substep - 1e-9)));
  const double h = dt / n;
  const double ub = std::clamp(u[0], -1.0, 1.0);
  const double uc = std::clamp(u[1], -1.0, 1.0);
  const double ug = std::clamp(u[2], -1.0, 1.0);

  LoaderState s = state;
  for (int i = 0; i < n; ++i) {
    const double accel = m.drive_accel * std::max(ug, 0.0) - cond.surface_drag * s.v -
                         m.load_resistance * s.internal_load -
                         (s.v > 0.0 ? m.brake_decel * std::max(-ug, 0.0) : 0.0);
    s.v = std::clamp(s.v + accel * h, 0.0, m.v_max);
    s.x -= s.v * h;

    const double t1 = std::clamp(s.theta1 + ub * m.boom_rate * h, m.theta1_min, m.theta1_max);
    const double t2 = std::clamp(s.theta2 + uc * m.bucket_rate * h, m.theta2_min, m.theta2_max);
    const double lift = std::max(t1 - s.theta1, 0.0);
    const double curl = std::max(t2 - s.theta2, 0.0);
    s.theta1 = t1;
    s.theta2 = t2;

    const double depth = std::max(0.0, -s.x);
    const double height = contact_height_factor(s.theta1, m);
    const double contact = std::min(1.0, depth / m.full_contact_depth) * height;
    const double curl_frac = curl_fraction(s, m);
    s.internal_load = cond.material_stiffness * depth * (1.0 - 0.5 * curl_frac);

    // A flat bucket holds little; raising the boom only adds to a curled one.
    const double capacity =
        std::min(1.0, 0.1 + curl_frac * (0.6 + 0.4 * std::min(1.0, s.theta1 / m.lift_capacity_angle)));
    const double lift_gain = s.fill > 0.0 ? m.lift_fill_gain * lift : 0.0;
    const double gain = contact * (m.curl_fill_gain * curl + lift_gain);
    s.fill = std::max(s.fill, std::min(s.fill + gain, capacity));
  }
  return s;
}

ExtendedSensorVector sense_clean(const LoaderState& s, const ConditionProfile& cond,
                                 const MachineParams& m) {
  ExtendedSensorVector out{};
  out[kTheta1] = s.theta1;
  out[kTheta2] = s.theta2;
  out[kPd] = (kPdIdle + kPdSpeed * s.v + kPdLoad * s.internal_load) * (1.0 - cond.slip);
  out[kPt] = kPtIdle + kPtLoad * s.internal_load + kPtBoom * s.theta1;
  out[kPl] = kPlIdle + kPlFill * s.fill + kPlLoad * s.internal_load;
  out[kPb] = kPbIdle + kPbFill * s.fill + kPbLoad * s.internal_load * curl_fraction(s, m);
  out[kPumpAngle] = s.v / m.v_max;
  return out;
}

ExtendedSensorVector sense(const LoaderState& s, const ConditionProfile& cond, nn::Rng& rng,
                           const MachineParams& m) {
  ExtendedSensorVector out = sense_clean(s, cond, m);
  for (std::size_t c = 0; c < kSensorChannels; ++c) {
    const double z = rng.normal();
    if (cond.sensor_noise_std[c] > 0.0) out[c] += cond.sensor_noise_std[c] * z;
  }
  return out;
}

}  // namespace pileload::sim
