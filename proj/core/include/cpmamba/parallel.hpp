#pragma once

#include <cstddef>
#include <functional>

namespace cpmamba {

// Worker count: CPMAMBA_THREADS if set (>= 1), else hardware concurrency.
std::size_t thread_budget();

// Runs body(i) for i in [0, n) over up to thread_budget() threads. Each index
// runs exactly once; exceptions propagate (the first one wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace cpmamba
