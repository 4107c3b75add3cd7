#pragma once

namespace dzsr {

/// Applies DZSR_THREADS (if set) as torch's intra-op thread count and pins
/// inter-op parallelism to one thread. Returns the intra-op count in effect.
/// Throws ConfigError for a malformed value.
int configure_threads();

}  // namespace dzsr
