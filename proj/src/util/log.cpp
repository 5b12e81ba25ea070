#include "pileload/util/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace pileload::util {

namespace {

LogLevel from_env() {
  const char* v = std::getenv("PILELOAD_VERBOSITY");
  if (!v) return LogLevel::info;
  const std::string s(v);
  if (s == "0") return LogLevel::quiet;
  if (s == "2") return LogLevel::debug;
  return LogLevel::info;
}

std::atomic<int>& level_store() {
  static std::atomic<int> level{static_cast<int>(from_env())};
  return level;
}

std::mutex& out_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

LogLevel log_level() { return static_cast<LogLevel>(level_store().load()); }

void set_log_level(LogLevel level) { level_store().store(static_cast<int>(level)); }

void log(LogLevel level, std::string_view message) {
  if (level == LogLevel::quiet || static_cast<int>(level) > level_store().load()) return;
  std::lock_guard lock(out_mutex());
  std::cerr << message << '\n';
}

}  // namespace pileload::util
