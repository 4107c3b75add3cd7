#include "dzsr/log.hpp"

#include <string>

#include <spdlog/spdlog.h>

namespace dzsr::log {

void info(std::string_view msg) { spdlog::info("{}", msg); }
void warn(std::string_view msg) { spdlog::warn("{}", msg); }
void debug(std::string_view msg) { spdlog::debug("{}", msg); }

void set_level(std::string_view level) {
  const auto parsed = spdlog::level::from_str(std::string(level));
  if (parsed != spdlog::level::off || level == "off") spdlog::set_level(parsed);
}

}  // namespace dzsr::log
