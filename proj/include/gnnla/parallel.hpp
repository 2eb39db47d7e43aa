#pragma once

#include <cstddef>
#include <functional>

namespace gnnla {

/// Number of workers to use for a request: 0 means hardware concurrency.
std::size_t resolve_threads(std::size_t requested);

/// Calls fn(i) for every i in [0, n) on up to `threads` workers. Items are independent and
/// write to their own slots, so results do not depend on the worker count. The first
/// exception (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

} // namespace gnnla
