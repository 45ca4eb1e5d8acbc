#pragma once

#include <cstddef>
#include <functional>

namespace qchain {

/// Worker count: QCHAIN_THREADS env var when set, else hardware concurrency.
unsigned thread_count();

/// Runs fn(i) for i in [0, n) across worker threads. Work items must be
/// independent; callers that reduce must do so by index so results do not
/// depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace qchain
