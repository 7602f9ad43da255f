#pragma once

#include <string>

namespace triage::util {

enum class LogLevel { kDebug = 0, kInfo, kWarn, kError, kOff };

// Process-wide threshold; messages below it are dropped. Thread-safe.
void set_log_level(LogLevel level);
LogLevel log_level();

void log(LogLevel level, const std::string& message);
inline void log_info(const std::string& m) { log(LogLevel::kInfo, m); }
inline void log_warn(const std::string& m) { log(LogLevel::kWarn, m); }

}  // namespace triage::util
