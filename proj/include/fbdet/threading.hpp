#pragma once

#include <cstddef>
#include <functional>

namespace fbdet {

// Worker count for parallel sections: FBDET_THREADS when set (minimum 1),
// otherwise the hardware concurrency.
std::size_t worker_threads();

// Runs fn(i) for i in [0, n). Work items must be independent; result layout
// must not depend on scheduling (callers index into preallocated storage).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace fbdet
