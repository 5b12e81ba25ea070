#include "pileload/simulator/expert.hpp"

#include <algorithm>

namespace pileload::sim {

ControlVector scripted_expert(const ExtendedSensorVector& s, ExpertMemory& memory,
                              const ExpertParams& p) {
  const double th1 = s[kTheta1];
  const double th2 = s[kTheta2];
  const int last = p.final_stage < 0 ? p.last_stage() : std::min(p.final_stage, p.last_stage());

  if (memory.phase == ExpertPhase::approach) {
    const bool at_rest = th1 < p.rest_angle && th2 < p.rest_angle;
    if (at_rest && s[kPt] < p.impact_pt_bar) return {0.0, 0.0, p.drive_gain};
    memory.phase = ExpertPhase::fill;
  }

  if (memory.phase == ExpertPhase::fill) {
    for (;;) {
      const auto k = static_cast<std::size_t>(memory.stage);
      if (!memory.lifting) {
        if (th2 < p.curl_stages[k]) return {0.0, 1.0, 0.0};
        if (memory.stage >= last) break;
        memory.lifting = true;
      }
      if (th1 < p.lift_stages[k]) return {1.0, 0.0, 0.0};
      memory.lifting = false;
      ++memory.stage;
    }
    memory.phase = ExpertPhase::finish;
  }

  if (memory.phase == ExpertPhase::finish) {
    if (th1 < p.finish_theta1) return {1.0, 0.0, 0.0};
    memory.phase = ExpertPhase::done;
  }
  return {0.0, 0.0, 0.0};
}

}  // namespace pileload::sim
