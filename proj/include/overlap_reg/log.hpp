#pragma once

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>

namespace overlap_reg {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

namespace detail {

inline LogLevel parse_log_level(const char* s) {
  if (s == nullptr) return LogLevel::warn;
  if (std::strcmp(s, "error") == 0) return LogLevel::error;
  if (std::strcmp(s, "warn") == 0) return LogLevel::warn;
  if (std::strcmp(s, "info") == 0) return LogLevel::info;
  if (std::strcmp(s, "debug") == 0) return LogLevel::debug;
  return LogLevel::warn;
}

inline LogLevel& log_level_ref() {
  // Initialized once from the environment; overridable via set_log_level.
  static LogLevel level = parse_log_level(std::getenv("OVERLAP_REG_LOG"));
  return level;
}

inline std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

inline LogLevel log_level() { return detail::log_level_ref(); }
inline void set_log_level(LogLevel level) { detail::log_level_ref() = level; }

inline void vlog(LogLevel level, const char* fmt, va_list args) {
  if (level > log_level()) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::lock_guard<std::mutex> lock(detail::log_mutex());
  std::fprintf(stderr, "[overlap_reg %s] ", names[static_cast<int>(level)]);
  std::vfprintf(stderr, fmt, args);
  std::fputc('\n', stderr);
}

#if defined(__GNUC__)
__attribute__((format(printf, 2, 3)))
#endif
inline void log(LogLevel level, const char* fmt, ...) {
  if (level > log_level()) return;
  va_list args;
  va_start(args, fmt);
  vlog(level, fmt, args);
  va_end(args);
}

}  // namespace overlap_reg
