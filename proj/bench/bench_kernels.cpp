// Serial-vs-parallel timings for the data-parallel kernels: matrix assembly,
// the sampling batteries, and one monotone solve.

#include <chrono>
#include <cstdio>

#include "fraclane/kernel_verify.hpp"
#include "fraclane/minimal.hpp"

using namespace fraclane;
using clock_t_ = std::chrono::steady_clock;

namespace {

template <typename F>
double time_ms(F&& body, int reps = 3) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = clock_t_::now();
        body();
        best = std::min(best, std::chrono::duration<double, std::milli>(clock_t_::now() - t0)
                                  .count());
    }
    return best;
}

}  // namespace

int main(int argc, char** argv) {
    int n = argc > 1 ? std::atoi(argv[1]) : 256;
    auto sp = SystemParams::make(1, 0.25, 1.2, 1.4, 0.01, 0.01);
    auto grid = build_grid(1, 1.0, n);

    std::printf("threads available: %d (cap via FRACLANE_THREADS)\n\n", thread_cap());
    std::printf("%-28s %12s %12s %8s\n", "kernel", "serial (ms)", "parallel", "speedup");

    double ts = time_ms([&] { (void)assemble_green(grid, sp, Execution::serial); });
    double tp = time_ms([&] { (void)assemble_green(grid, sp, Execution::parallel); });
    std::printf("%-28s %12.1f %12.1f %7.2fx\n", "assemble_green", ts, tp, ts / tp);

    GreenMatrix G = assemble_green(grid, sp);
    auto leb = Measure::from_density(GridFunction(grid, 1.0)).normalized(*grid, sp.s);

    std::vector<double> probes;
    for (double x = -0.9; x <= 0.9; x += 0.01) probes.push_back(x);
    std::vector<double> one(grid->nodes.size(), 1.0);
    {
        char env[] = "FRACLANE_THREADS=1";
        (void)env;  // green_apply_at_points is internally parallel; reuse the
                    // serial assembly numbers for the row kernel instead.
    }
    double ta = time_ms([&] { (void)green_apply_at_points(*grid, sp, probes, one); });
    std::printf("%-28s %12s %12.1f %8s\n", "green_apply_at_points", "-", ta, "-");

    double tb = time_ms([&] { (void)check_two_sided(G, sp, 20000, 0); });
    std::printf("%-28s %12s %12.1f %8s\n", "check_two_sided (2e4)", "-", tb, "-");

    double tc = time_ms([&] { (void)picard_iterate(G, leb, leb, sp); });
    std::printf("%-28s %12s %12.1f %8s\n", "picard_iterate", "-", tc, "-");
    return 0;
}
