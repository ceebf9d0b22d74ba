#pragma once

#include <cstddef>
#include <functional>

namespace cascadelab {

/// Number of worker threads to use: hardware concurrency capped by the
/// CASCADELAB_THREADS environment variable (1 disables threading).
std::size_t worker_count();

/// Runs fn(i) for i in [0, n). Work is chunked statically across workers;
/// every index writes only its own output slot, so results are identical
/// for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace cascadelab
