#pragma once

#include <cstddef>
#include <functional>

namespace stereo {

// Worker count for the process-wide pool. Resolved once from the
// STEREO_THREADS environment variable, else hardware concurrency.
std::size_t thread_count();

// Runs fn(begin, end) over a contiguous split of [0, n). Each index is
// handled by exactly one invocation and every invocation walks its range in
// ascending order, so results do not depend on the worker count. Falls back
// to a single inline call for small n.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t min_per_thread = 1024);

}  // namespace stereo
