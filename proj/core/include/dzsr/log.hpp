#pragma once

#include <string_view>

namespace dzsr::log {

// Thin facade over spdlog. It lives in its own translation unit because the
// fmt headers bundled with libtorch shadow the ones spdlog was built against.
void info(std::string_view msg);
void warn(std::string_view msg);
void debug(std::string_view msg);

/// "trace" | "debug" | "info" | "warn" | "error" | "off"; unknown names are ignored.
void set_level(std::string_view level);

}  // namespace dzsr::log
