// Timing comparison of the OpenMP kernels against their serial reference
// implementations, plus a bitwise agreement check on each pair.

#include <chrono>
#include <cstdio>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fbsde/benchmarks.hpp"
#include "fbsde/hjb.hpp"
#include "fbsde/mc.hpp"

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads = %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled (serial build)\n");
#endif

    fbsde::MarketParams params;
    params.b = [](double) { return 0.2; };
    params.sigma = [](double) { return 0.4; };
    const auto spec = fbsde::build_riskmin(params);
    const auto grid = fbsde::riskmin_default_grid(params, 400, 1600);

    std::printf("\nbackward field solve (riskmin, %zu x %zu grid)\n", grid.nx(), grid.nt() - 1);
    double t0 = now_seconds();
    const auto serial = fbsde::solve_reference(spec, grid);
    const double t_serial = now_seconds() - t0;
    t0 = now_seconds();
    const auto parallel = fbsde::solve(spec, grid);
    const double t_parallel = now_seconds() - t0;
    const bool solve_match =
        bitwise_equal(serial.control_field, parallel.control_field) &&
        serial.y0_at_x0 == parallel.y0_at_x0;
    std::printf("  serial reference: %8.3f s\n", t_serial);
    std::printf("  openmp kernel:    %8.3f s  (speedup %.2fx)\n", t_parallel,
                t_serial / t_parallel);
    std::printf("  bitwise match:    %s\n", solve_match ? "yes" : "NO");

    const auto policy = fbsde::ControlPolicy::constant(1.25);
    const std::size_t n_paths = 50000;
    const double dt = 1e-3;

    std::printf("\nforward Monte Carlo (%zu paths, dt = %g)\n", n_paths, dt);
    t0 = now_seconds();
    const auto mc_serial =
        fbsde::simulate_forward(spec, policy, n_paths, dt, 42, nullptr, /*parallel=*/false);
    const double mc_t_serial = now_seconds() - t0;
    t0 = now_seconds();
    const auto mc_parallel =
        fbsde::simulate_forward(spec, policy, n_paths, dt, 42, nullptr, /*parallel=*/true);
    const double mc_t_parallel = now_seconds() - t0;
    const bool mc_match = bitwise_equal(mc_serial.X, mc_parallel.X);
    std::printf("  serial reference: %8.3f s\n", mc_t_serial);
    std::printf("  openmp kernel:    %8.3f s  (speedup %.2fx)\n", mc_t_parallel,
                mc_t_serial / mc_t_parallel);
    std::printf("  bitwise match:    %s\n", mc_match ? "yes" : "NO");

    return solve_match && mc_match ? 0 : 1;
}
