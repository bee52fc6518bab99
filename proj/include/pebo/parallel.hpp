#pragma once

#include <cstddef>
#include <functional>

namespace pebo {

/// Worker cap: PEBO_THREADS when set (minimum 1), hardware concurrency
/// otherwise.
int worker_count();

/// Runs fn(i) for i in [0, n) across workers. Each index writes only its own
/// output slot, so results are deterministic regardless of scheduling.
void parallel_for(long n, const std::function<void(long)>& fn);

}  // namespace pebo
