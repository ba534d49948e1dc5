#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace taskclust {

/// Worker count used by parallel_for. 0 means hardware concurrency.
void set_thread_count(unsigned threads);
unsigned thread_count();

/// Runs body(i) for i in [0, n). Each index runs exactly once; callers write
/// results into preallocated per-index slots so output never depends on the
/// schedule. The first exception (lowest index) is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &body);

} // namespace taskclust
