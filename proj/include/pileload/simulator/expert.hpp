#pragma once

#include <vector>

#include "pileload/controllers/signals.hpp"

namespace pileload::sim {

/// Tuning of the scripted demonstrator. Fill proceeds as a staircase: curl
/// the bucket up to curl_stages[k], then raise the boom past lift_stages[k],
/// for k = 0 .. final_stage; the finish raises the boom clear of the pile.
/// lift_stages has one entry less than curl_stages.
struct ExpertParams {
  double drive_gain = 0.8;
  double impact_pt_bar = 78.0;
  double rest_angle = 0.02;  // rad; below this both joints count as untouched
  std::vector<double> curl_stages = {0.6, 1.18};
  std::vector<double> lift_stages = {0.3};
  /// last_stage() completes every stage; lower values stop early and lift out
  /// with a partial load. Negative means last_stage().
  int final_stage = -1;
  int last_stage() const { return static_cast<int>(curl_stages.size()) - 1; }
  double finish_theta1 = 0.8;
};

enum class ExpertPhase { approach, fill, finish, done };

struct ExpertMemory {
  ExpertPhase phase = ExpertPhase::approach;
  int stage = 0;
  bool lifting = false;
};

/// One command from one observation. The memory latches phase and staircase
/// step, so a joint that crossed its target is not chased back on sensor
/// noise. At most one component is non-zero.
ControlVector scripted_expert(const ExtendedSensorVector& s, ExpertMemory& memory,
                              const ExpertParams& params = {});

}  // namespace pileload::sim
