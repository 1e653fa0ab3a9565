#pragma once

#include <cstddef>
#include <functional>

namespace lhf {

/// Worker count: LHF_THREADS if set and positive, else hardware concurrency.
[[nodiscard]] std::size_t thread_budget();

/// Runs job(k) for k in [0, n) on up to thread_budget() threads. Jobs must
/// write only to their own output slot. The first exception thrown by any
/// job is rethrown on the calling thread after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& job);

}  // namespace lhf
