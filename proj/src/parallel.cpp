#include "fraclane/parallel.hpp"

#include <algorithm>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fraclane {

int thread_cap() {
    static const int cap = [] {
        int n = 1;
#ifdef _OPENMP
        n = omp_get_max_threads();
#endif
        if (const char* env = std::getenv("FRACLANE_THREADS")) {
            int req = std::atoi(env);
            if (req >= 1) n = std::min(n, req);
        }
        return std::max(1, n);
    }();
    return cap;
}

namespace detail {

void parallel_for_impl(std::size_t n, void* ctx, void (*body)(void*, std::size_t)) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_cap())
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        body(ctx, static_cast<std::size_t>(i));
#else
    for (std::size_t i = 0; i < n; ++i) body(ctx, i);
#endif
}

}  // namespace detail
}  // namespace fraclane
