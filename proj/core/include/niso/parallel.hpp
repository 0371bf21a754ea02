#pragma once

#include <cstddef>
#include <functional>

namespace niso {

/// Thread cap for internal kernels: ISO_CORE_THREADS if set to a positive
/// integer, otherwise the hardware concurrency. Read once per process.
std::size_t kernel_threads();

/// Splits [0, n) into contiguous chunks and runs `fn(begin, end)` on each.
/// Runs inline when n·cost_per_item is small or only one thread is allowed.
/// Each index is handled by exactly one chunk, so results do not depend on
/// the thread count as long as `fn` writes only to its own range.
void parallel_for(std::size_t n, std::size_t cost_per_item,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace niso
