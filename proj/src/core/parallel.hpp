#pragma once

#include <cstddef>
#include <functional>

namespace bicmix {

// Worker count from BICMIX_THREADS (default 1, capped at hardware concurrency
// times four). Read once per process.
std::size_t thread_count();

// Runs body(i) for i in [0, n) over contiguous chunks. Each index is written by
// exactly one worker, so results do not depend on the worker count. The first
// exception raised by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace bicmix
