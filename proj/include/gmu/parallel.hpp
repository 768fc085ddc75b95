#pragma once

#include <cstddef>
#include <functional>

namespace gmu {

/// Worker count from GMU_THREADS, falling back to hardware concurrency.
std::size_t default_thread_count();

/// Runs body(i) for i in [0, n) over contiguous chunks on up to `threads`
/// workers. Each index is visited exactly once; callers write results into
/// preallocated slots so the outcome does not depend on the schedule.
/// The first exception thrown by any worker is rethrown on the caller.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace gmu
