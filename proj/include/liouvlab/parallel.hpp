#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace liouvlab {

/// Process-wide cap on worker threads (default: hardware concurrency).
void set_max_threads(unsigned count);
unsigned max_threads();

/// Runs body(i) for i in [0, count) over contiguous static chunks.
/// Each index is handled by exactly one worker, so per-index outputs do not
/// depend on the thread count. Exceptions from workers are rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

/// Pairwise (cascade) summation in index order; result is independent of
/// how the values were produced.
double pairwise_sum(std::span<const double> values);

}  // namespace liouvlab
