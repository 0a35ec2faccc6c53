#pragma once

namespace cpmamba {

// Keeps freed tensor buffers inside the process heap instead of returning
// them to the OS after every step. Training allocates and frees the same
// multi-megabyte buffers each iteration, and re-faulting those pages costs
// more than the arithmetic. No-op outside glibc.
void tune_allocator();

}  // namespace cpmamba
