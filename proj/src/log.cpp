#include "xsect/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace xsect {
namespace {

LogLevel parse_level(const char* text) {
  if (text == nullptr) return LogLevel::warn;
  const std::string s(text);
  if (s == "error") return LogLevel::error;
  if (s == "info") return LogLevel::info;
  if (s == "debug") return LogLevel::debug;
  return LogLevel::warn;
}

std::atomic<int>& threshold_storage() {
  static std::atomic<int> level{static_cast<int>(parse_level(std::getenv("XSECT_LOG")))};
  return level;
}

const char* label(LogLevel level) {
  switch (level) {
    case LogLevel::error: return "error";
    case LogLevel::warn: return "warn";
    case LogLevel::info: return "info";
    case LogLevel::debug: return "debug";
  }
  return "?";
}

}  // namespace

LogLevel log_threshold() { return static_cast<LogLevel>(threshold_storage().load()); }

void set_log_threshold(LogLevel level) { threshold_storage().store(static_cast<int>(level)); }

void log(LogLevel level, std::string_view message) {
  if (static_cast<int>(level) > threshold_storage().load()) return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << "[xsect " << label(level) << "] " << message << '\n';
}

}  // namespace xsect
