#pragma once

#include <atomic>
#include <iostream>
#include <string_view>

namespace gridvqa::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

inline std::atomic<Level>& threshold() {
    static std::atomic<Level> level{Level::Info};
    return level;
}

inline void set_level(Level l) { threshold() = l; }

inline void write(Level l, std::string_view tag, std::string_view msg) {
    if (l < threshold().load()) return;
    std::cerr << "[" << tag << "] " << msg << '\n';
}

inline void debug(std::string_view msg) { write(Level::Debug, "debug", msg); }
inline void info(std::string_view msg) { write(Level::Info, "info", msg); }
inline void warn(std::string_view msg) { write(Level::Warn, "warn", msg); }
inline void error(std::string_view msg) { write(Level::Error, "error", msg); }

}  // namespace gridvqa::log
