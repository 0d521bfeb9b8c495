#pragma once

#include <cstddef>
#include <functional>

namespace sampler {

// Worker cap for parallel_for; 0 means hardware concurrency.
void set_max_threads(unsigned n);
unsigned max_threads();

// Runs body(i) for i in [0, n) over contiguous chunks. Callers write results
// into per-index slots so reductions stay in index order. The first
// exception thrown by any body is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace sampler
