#pragma once

#include <cstddef>
#include <functional>

namespace drolab {

/// Worker count: DROLAB_THREADS if set to a positive integer, otherwise the
/// hardware concurrency.
std::size_t thread_count();

/// Runs fn(0) ... fn(n_blocks - 1), possibly concurrently. Callers write
/// per-block results into preallocated slots and reduce them in block order,
/// so results never depend on the number of threads. If blocks throw, the
/// exception of the lowest-indexed failing block is rethrown.
void run_blocks(std::size_t n_blocks, const std::function<void(std::size_t)>& fn);

}  // namespace drolab
