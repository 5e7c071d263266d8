#pragma once

#include <cstddef>
#include <functional>

namespace mnca {

/// Worker count used by parallel_for; 1 runs everything inline.
void set_thread_count(int n);
int thread_count();

/// Calls fn(i) for i in [0, n). Work items are independent; callers reduce
/// results afterwards in index order so output does not depend on threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace mnca

namespace mnca {

/// Keeps large scratch buffers on the heap instead of fresh mmaps; the
/// training loops allocate and free the same sizes every step.
void tune_allocator();

}  // namespace mnca
