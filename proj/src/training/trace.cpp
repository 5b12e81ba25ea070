#include "pileload/training/trace.hpp"

#include "pileload/util/text.hpp"

namespace pileload::train {

std::string trace_comparison(const ctl::ControllerParams& params, const data::Demonstration& demo) {
  const ctl::ControllerSpec& spec = params.spec;
  std::string out = "t";
  for (auto name : kControlNames) out += ",demo_" + std::string(name);
  for (auto name : kControlNames) out += ",pred_" + std::string(name);
  if (spec.has_attention()) {
    for (std::size_t c : spec.input_channels()) out += ",m_" + std::string(kChannelNames[c]);
  }
  if (spec.kind == ctl::ControllerKind::dannet) {
    for (auto name : kControlNames) out += ",m_" + std::string(name);
  }
  out += "\n";

  for (const data::Record& rec : demo.records) {
    const ctl::Action a = ctl::act(params, rec.s);
    out += util::format_double(rec.t);
    for (double v : rec.u) out += "," + util::format_double(v);
    for (double v : a.u) out += "," + util::format_double(v);
    if (a.mask) {
      for (double v : *a.mask) out += "," + util::format_double(v);
    }
    if (a.output_mask) {
      for (double v : *a.output_mask) out += "," + util::format_double(v);
    }
    out += "\n";
  }
  return out;
}

}  // namespace pileload::train
