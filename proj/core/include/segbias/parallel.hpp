#pragma once

#include <cstddef>
#include <functional>

namespace segbias {

/// Worker count: SEGBIAS_THREADS if set (>= 1), else hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Callers write results into slot i so the
/// outcome never depends on scheduling. The first exception thrown by any
/// task is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace segbias
