#pragma once

#include <string>

#include "pileload/controllers/controller.hpp"
#include "pileload/dataset/demonstration.hpp"

namespace pileload::train {

/// One row per demo record: t, demonstrated controls, predicted controls, and
/// the attention masks when the controller has them (m_<channel> per input
/// channel, m_<control> for DANNet's output mask).
std::string trace_comparison(const ctl::ControllerParams& params, const data::Demonstration& demo);

}  // namespace pileload::train
