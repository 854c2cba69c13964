#pragma once

#include <string>

namespace ovo {

/// Stderr logging gated by the OVO_LOG environment variable:
/// quiet < info (default) < debug. Machine-readable results never go here.
enum class LogLevel : int { quiet = 0, info = 1, debug = 2 };

LogLevel log_level();
void log_info(const std::string& message);
void log_debug(const std::string& message);

}  // namespace ovo
