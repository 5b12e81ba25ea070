#pragma once

#include <string_view>

namespace pileload::util {

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

/// From PILELOAD_VERBOSITY (0, 1 or 2; default 1), read once.
LogLevel log_level();
void set_log_level(LogLevel level);

/// Writes one line to stderr when `level` is enabled.
void log(LogLevel level, std::string_view message);
inline void log_info(std::string_view message) { log(LogLevel::info, message); }
inline void log_debug(std::string_view message) { log(LogLevel::debug, message); }

}  // namespace pileload::util
