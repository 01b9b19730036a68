#pragma once

#include <cstddef>
#include <functional>

namespace stochflow {

/// Runs body(i) for i in [0, n) on up to `workers` threads. Indices are
/// claimed dynamically, so callers must write results by index and reduce
/// them afterwards in index order. The first exception thrown is rethrown.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body);

}  // namespace stochflow
