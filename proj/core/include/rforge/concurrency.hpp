#pragma once

#include <cstddef>
#include <functional>

namespace rforge {

// Runs fn(i) for i in [0, n) on at most `limit` worker threads. Callers write
// results into per-index slots so output order never depends on scheduling.
// The first exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t n, std::size_t limit,
                  const std::function<void(std::size_t)>& fn);

}  // namespace rforge
