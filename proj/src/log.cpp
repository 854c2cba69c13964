#include "ovo/log.hpp"

#include <cstdlib>
#include <iostream>

namespace ovo {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("OVO_LOG");
    if (env == nullptr) {
      return LogLevel::info;
    }
    const std::string v(env);
    if (v == "quiet") {
      return LogLevel::quiet;
    }
    if (v == "debug") {
      return LogLevel::debug;
    }
    return LogLevel::info;
  }();
  return level;
}

void log_info(const std::string& message) {
  if (static_cast<int>(log_level()) >= static_cast<int>(LogLevel::info)) {
    std::cerr << "[ovo] " << message << "\n";
  }
}

void log_debug(const std::string& message) {
  if (static_cast<int>(log_level()) >= static_cast<int>(LogLevel::debug)) {
    std::cerr << "[ovo] " << message << "\n";
  }
}

}  // namespace ovo
