#pragma once

#include <cstddef>

namespace fraclane {

/// Execution policy for the heavy kernels. The serial path is the reference
/// implementation; the parallel path must produce bit-identical results
/// (independent outputs per index, no reductions across threads).
enum class Execution { serial, parallel };

/// Worker cap: min(omp_get_max_threads(), $FRACLANE_THREADS). Cached.
int thread_cap();

namespace detail {
void parallel_for_impl(std::size_t n, void* ctx, void (*body)(void*, std::size_t));
}

/// Runs body(i) for i in [0, n). Each index writes only its own outputs.
template <typename F>
void parallel_for(std::size_t n, Execution exec, F&& body) {
    if (exec == Execution::serial || thread_cap() <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    auto trampoline = [](void* ctx, std::size_t i) { (*static_cast<F*>(ctx))(i); };
    detail::parallel_for_impl(n, &body, trampoline);
}

}  // namespace fraclane
