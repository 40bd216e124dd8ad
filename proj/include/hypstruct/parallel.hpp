#pragma once

#include <cstddef>
#include <functional>

namespace hypstruct {

/// Worker count: HYPSTRUCT_THREADS when set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
std::size_t worker_count();

/// Calls body(begin, end) on contiguous chunks of [0, n) from up to
/// worker_count() threads. Returns after every chunk finished; the first
/// exception thrown by a chunk is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace hypstruct
