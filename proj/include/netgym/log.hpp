#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

namespace netgym::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

inline std::optional<Level> parse_level(std::string_view s) {
  if (s == "debug") return Level::kDebug;
  if (s == "info") return Level::kInfo;
  if (s == "warn" || s == "warning") return Level::kWarn;
  if (s == "error") return Level::kError;
  if (s == "off") return Level::kOff;
  return std::nullopt;
}

namespace detail {
inline Level& threshold() {
  static Level level = [] {
    if (const char* env = std::getenv("NETGYM_LOG")) {
      if (auto l = parse_level(env)) return *l;
    }
    return Level::kWarn;
  }();
  return level;
}
inline std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}
inline const char* tag(Level l) {
  switch (l) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarn: return "warn";
    case Level::kError: return "error";
    default: return "";
  }
}
}  // namespace detail

inline void set_level(Level l) { detail::threshold() = l; }
inline Level level() { return detail::threshold(); }
inline bool enabled(Level l) { return l >= detail::threshold() && l != Level::kOff; }

template <typename... Args>
void write(Level l, const Args&... args) {
  if (!enabled(l)) return;
  std::ostringstream os;
  os << "[netgym " << detail::tag(l) << "] ";
  (os << ... << args);
  os << '\n';
  std::lock_guard lock(detail::sink_mutex());
  std::cerr << os.str();
}

template <typename... Args> void debug(const Args&... a) { write(Level::kDebug, a...); }
template <typename... Args> void info(const Args&... a) { write(Level::kInfo, a...); }
template <typename... Args> void warn(const Args&... a) { write(Level::kWarn, a...); }
template <typename... Args> void error(const Args&... a) { write(Level::kError, a...); }

}  // namespace netgym::log
