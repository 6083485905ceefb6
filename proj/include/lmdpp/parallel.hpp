#pragma once

#include <cstddef>
#include <functional>

namespace lmdpp {

// Worker count for parallel_for: DPP_THREADS if set to a positive integer,
// otherwise the hardware concurrency, clamped to [1, 256].
std::size_t thread_count();

// Runs fn(begin, end) over disjoint blocks of [0, n), possibly from several
// threads. Results must not depend on the partitioning: callers either write
// to disjoint per-index slots or reduce with an order-free rule. Never nest.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace lmdpp
