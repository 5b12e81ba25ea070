#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace pileload {

/// Machine observation channels in logging order. The first four form the
/// controller sensor vector s; p_l, p_b and the pump angle are the extra
/// attention signals that make up s'.
enum Channel : std::size_t {
  kTheta1 = 0,  // boom joint angle, rad
  kTheta2,      // bucket joint angle, rad
  kPd,          // drive transmission pressure, bar
  kPt,          // telescope joint pressure, bar
  kPl,          // boom joint pressure, bar
  kPb,          // bucket joint pressure, bar
  kPumpAngle,   // HST pump angle, normalized
};

inline constexpr std::size_t kSensorChannels = 7;
inline constexpr std::size_t kControlDims = 3;

using ExtendedSensorVector = std::array<double, kSensorChannels>;
/// (u_theta1 boom, u_theta2 bucket, u_g throttle), each in [-1, 1].
using ControlVector = std::array<double, kControlDims>;

inline constexpr std::array<std::string_view, kSensorChannels> kChannelNames = {
    "theta1_rad", "theta2_rad", "p_d_bar", "p_t_bar", "p_l_bar", "p_b_bar", "a_norm"};
inline constexpr std::array<std::string_view, kControlDims> kControlNames = {
    "u_theta1", "u_theta2", "u_g"};

}  // namespace pileload
