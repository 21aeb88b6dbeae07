#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace sicu {

/// Worker count for `requested` (0 = hardware concurrency), never above n.
unsigned resolve_threads(unsigned requested, std::size_t n);

/// Calls fn(i) for i in [0, n) over strided workers. The first exception
/// thrown by any call is rethrown after all workers finish.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

/// Keeps large training buffers on the heap instead of fresh mmaps per
/// batch (glibc only; no-op elsewhere).
void tune_allocator_for_training();

}  // namespace sicu
