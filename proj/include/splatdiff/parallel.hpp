#pragma once

#include <cstddef>
#include <functional>

namespace splatdiff {

/// Runs fn(i) for i in [0, count) on up to `threads` workers using contiguous
/// blocks. fn must only write state owned by index i. threads <= 1 runs
/// inline. Exceptions from workers are rethrown on the calling thread.
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace splatdiff
