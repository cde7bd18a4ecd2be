#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>

namespace roulette::log {

enum class Level { debug, info, warning, error };

inline std::string_view level_name(Level level) {
  switch (level) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warning: return "warning";
    case Level::error: return "error";
  }
  return "?";
}

using Sink = std::function<void(Level, std::string_view)>;

namespace detail {

struct State {
  std::mutex mutex;
  Level threshold = Level::warning;
  Sink sink = [](Level level, std::string_view msg) {
    std::clog << "[" << level_name(level) << "] " << msg << '\n';
  };
};

inline State& state() {
  static State s;
  return s;
}

}  // namespace detail

// Replaces the process-wide sink; returns the previous one.
inline Sink set_sink(Sink sink) {
  auto& s = detail::state();
  std::lock_guard lock(s.mutex);
  return std::exchange(s.sink, std::move(sink));
}

inline void set_threshold(Level level) {
  auto& s = detail::state();
  std::lock_guard lock(s.mutex);
  s.threshold = level;
}

inline void write(Level level, std::string_view msg) {
  auto& s = detail::state();
  std::lock_guard lock(s.mutex);
  if (level >= s.threshold && s.sink) s.sink(level, msg);
}

inline void debug(std::string_view msg) { write(Level::debug, msg); }
inline void info(std::string_view msg) { write(Level::info, msg); }
inline void warning(std::string_view msg) { write(Level::warning, msg); }
inline void error(std::string_view msg) { write(Level::error, msg); }

}  // namespace roulette::log
