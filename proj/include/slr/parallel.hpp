#pragma once

#include <cstddef>
#include <functional>

namespace slr {

/// Worker count: SLR_RECON_THREADS if set and positive, else hardware concurrency.
std::size_t worker_threads();

/// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the first
/// worker exception after all have joined.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)> &fn);

}  // namespace slr
