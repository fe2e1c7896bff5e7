#pragma once

#include <cstddef>
#include <functional>

namespace patchleak {

// Worker count: PATCHLEAK_THREADS if set to a positive integer, else the hardware concurrency.
std::size_t worker_count();

// Runs body(i) for i in [0, n). Each index is processed exactly once; output slots indexed by i
// keep results independent of scheduling. The first exception thrown by any body is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace patchleak
