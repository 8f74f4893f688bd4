#pragma once

#include <cstddef>
#include <functional>

namespace atlas {

/// Worker cap: min(SUSCEPT_ATLAS_THREADS, hardware concurrency), at least 1.
int max_threads();

/// Runs fn(i) for i in [0, n) across up to `threads` workers (0 = max_threads()).
/// Items must be independent; exceptions from workers are rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int threads = 0);

}  // namespace atlas
