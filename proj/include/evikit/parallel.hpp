#pragma once

#include <cstddef>
#include <functional>

namespace evikit {

/// Worker cap: hardware concurrency, lowered by the EVIKIT_THREADS environment
/// variable when set to a positive integer.
unsigned worker_count();

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunks are disjoint,
/// so per-index work that writes only its own outputs is partition independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

} // namespace evikit
