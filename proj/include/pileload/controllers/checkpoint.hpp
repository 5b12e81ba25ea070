#pragma once

#include <filesystem>
#include <string>

#include "pileload/controllers/controller.hpp"
#include "pileload/errors.hpp"

namespace pileload::ctl {

/// Checkpoint layout:
///
///   PILECTL v1 <kind> <input_dim> <attention_input_dim|-> <norm:zscore|none>\n
///   <name> <rows> <cols>\n            one line per tensor, F then A
///   \n
///   <payload>
///
/// The payload is every tensor's values in declared order, row-major, as
/// little-endian IEEE-754 binary64, followed (norm:zscore only) by the mean
/// and stddev vectors over ControllerSpec::feature_channels().
class CheckpointError : public DataError {
 public:
  enum class Kind { io, bad_header, shape_mismatch, truncated, trailing_data };

  CheckpointError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

void save_checkpoint(const ControllerParams& params, const std::filesystem::path& path);
ControllerParams load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const ControllerParams& params);
ControllerParams parse_checkpoint(const std::string& bytes);

}  // namespace pileload::ctl
