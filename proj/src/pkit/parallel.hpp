#pragma once

#include <cstddef>

#include <omp.h>

namespace pkit {

// threads == 1 runs the plain loop; threads == 0 uses the OpenMP default.
// Every parallel kernel in this project writes to per-index slots, so the
// schedule never affects results.
template <class F>
void parallel_for(std::size_t n, int threads, F&& body) {
    if (threads == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(nt)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        body(static_cast<std::size_t>(i));
}

}  // namespace pkit
