#pragma once

#include <cstddef>
#include <functional>

namespace raptor::par {

// Global worker count for data-parallel voxel loops. Defaults to 1 so that
// library results are bit-reproducible unless the caller opts in.
void set_num_threads(int n);
int num_threads();
int hardware_threads();

// Splits [0, n) into contiguous chunks and runs `body(begin, end)` on each,
// using up to num_threads() workers. Falls back to a direct call when a
// single worker is configured or n is small.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

} // namespace raptor::par
