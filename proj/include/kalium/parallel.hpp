#pragma once

#include <cstddef>
#include <functional>

namespace kalium {

// Number of workers used for parallel sections: hardware concurrency capped
// by the KALIUM_THREADS environment variable (and by the task count).
std::size_t worker_count(std::size_t n_tasks);

// Runs fn(i) for i in [0, n). Tasks must be independent; each writes only
// its own output slot, so results do not depend on scheduling. The first
// exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace kalium
