#pragma once

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace memoctrl {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

// Verbosity comes from the MEMOCTRL_LOG environment variable
// (error | info | debug); unknown values fall back to "error".
inline LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("MEMOCTRL_LOG");
    if (env == nullptr) return LogLevel::Error;
    if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
    if (std::strcmp(env, "info") == 0) return LogLevel::Info;
    if (std::strcmp(env, "error") != 0)
      std::fprintf(stderr, "memoctrl: unknown MEMOCTRL_LOG value '%s', using 'error'\n", env);
    return LogLevel::Error;
  }();
  return level;
}

inline void log_at(LogLevel lvl, const char* fmt, ...) {
  if (static_cast<int>(lvl) > static_cast<int>(log_level())) return;
  std::va_list args;
  va_start(args, fmt);
  std::vfprintf(stderr, fmt, args);
  va_end(args);
  std::fputc('\n', stderr);
}

#define MEMOCTRL_LOG_ERROR(...) ::memoctrl::log_at(::memoctrl::LogLevel::Error, __VA_ARGS__)
#define MEMOCTRL_LOG_INFO(...) ::memoctrl::log_at(::memoctrl::LogLevel::Info, __VA_ARGS__)
#define MEMOCTRL_LOG_DEBUG(...) ::memoctrl::log_at(::memoctrl::LogLevel::Debug, __VA_ARGS__)

} // namespace memoctrl
