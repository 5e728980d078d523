#pragma once

#include <cstddef>
#include <functional>

namespace fracdiff {

/// Number of worker threads: FRACDIFF_THREADS if set, else the hardware
/// concurrency (at least 1).
unsigned worker_count();

/// Runs body(begin, end) over a fixed partition of [0, n) into contiguous
/// chunks. The partition depends only on n and worker_count(), so results
/// written to disjoint slots are reproducible.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace fracdiff
