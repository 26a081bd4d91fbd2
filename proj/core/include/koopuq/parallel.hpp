#pragma once

#include <cstddef>
#include <functional>

namespace koopuq {

/// Worker cap: KOOPMAN_UQ_THREADS if set, otherwise hardware concurrency.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n). Work is split into contiguous index chunks,
/// one per worker; every index is written exactly once, so results are
/// identical for any worker count as long as fn(i) depends only on i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace koopuq
