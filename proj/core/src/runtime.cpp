#include "dzsr/runtime.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>
#include <string>

#include <torch/torch.h>

#include "dzsr/error.hpp"

namespace dzsr {

int configure_threads() {
  static bool interop_set = false;
  if (!interop_set) {
    // set_num_interop_threads may only be called once per process.
    try {
      at::set_num_interop_threads(1);
    } catch (const c10::Error&) {
    }
    interop_set = true;
  }
  if (const char* env = std::getenv("DZSR_THREADS"); env && *env) {
    int n = 0;
    const auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), n);
    if (ec != std::errc() || *ptr != '\0' || n < 1) {
      throw ConfigError(std::string("DZSR_THREADS must be a positive integer, got '") + env + "'");
    }
    at::set_num_threads(n);
  }
  return at::get_num_threads();
}

}  // namespace dzsr
