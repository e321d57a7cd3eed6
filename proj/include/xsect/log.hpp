#pragma once

#include <string_view>

namespace xsect {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

// Threshold is read once from the XSECT_LOG environment variable
// (error|warn|info|debug, default warn).
LogLevel log_threshold();
void set_log_threshold(LogLevel level);
void log(LogLevel level, std::string_view message);

}  // namespace xsect
