#pragma once

#include <atomic>
#include <cstdint>
#include <span>

#include "fbsde/field.hpp"
#include "fbsde/model.hpp"

namespace fbsde {

// Off-grid query bookkeeping shared by a solve run.
struct EvalCounters {
    std::atomic<std::uint64_t> queries{0};
    std::atomic<std::uint64_t> extrapolated{0};
    double fraction() const {
        const auto q = queries.load();
        return q == 0 ? 0.0 : static_cast<double>(extrapolated.load()) / static_cast<double>(q);
    }
};

// One time layer of field data plus derivative estimates; everything the
// transformed driver needs at a fixed t.
struct DriverContext {
    const ProblemSpec* spec = nullptr;
    std::span<const double> x_nodes;
    std::span<const double> y_row;
    std::span<const double> z_row;
    std::span<const double> k_row;  // [space x atoms], row-major
    const DerivativeLayer* deriv = nullptr;
    double t = 0.0;
    EvalCounters* counters = nullptr;  // optional
};

DriverContext make_context(const ProblemSpec& spec, const DecouplingField& field,
                           const DerivativeLayer& deriv, std::size_t time_index,
                           EvalCounters* counters = nullptr);

// Transformed driver G_u at one grid node:
//   g(t,x,y,z~,k~,u) + y' a + 1/2 y'' b^2 + z' b
//   + sum_i w_i { y(x+c_i) - y - y' c_i } + sum_i w_i { k(x+c_i) - k(x) }
// with a, b, c evaluated at the field state and z~, k~ the lifted BSDE data.
double eval_driver(const DriverContext& ctx, std::size_t x_index, double u);

enum class OptBranch : char { vertex_max = 'M', vertex_min = 'm', grid = 'g' };

struct DriverOptimum {
    double u_hat = 0.0;
    double g_hat = 0.0;
    OptBranch branch = OptBranch::grid;
};

// Pointwise optimizer of u -> G_u(t,x) honoring the spec's objective sense.
// Exact quadratics (detected by five-point probing) are solved by the vertex
// formula clamped to the control interval; anything else falls back to grid
// search at the control set resolution, ties toward the smallest u.
DriverOptimum maximize_driver(const DriverContext& ctx, std::size_t x_index);

struct PathResidualStats {
    double mean = 0.0;
    double rms = 0.0;
    std::size_t steps = 0;
};

struct JumpMark {
    std::int32_t step = 0;
    std::int32_t atom = 0;
};

// One simulated forward trajectory (a view into a PathBundle).
struct ForwardPathView {
    std::span<const double> times;  // n_steps + 1
    std::span<const double> x;      // n_steps + 1
    std::span<const double> db;     // n_steps
    std::span<const double> u;      // n_steps + 1
    std::span<const JumpMark> marks;
    double dt = 0.0;
};

// Path-level numerical check of the jump chain rule: per-step residual of the
// composed process y(t, X(t)) against its drift / diffusion / jump
// decomposition. Requires a deterministic-mode field and matching dt.
PathResidualStats ito_ventzell_residual(const DecouplingField& field, const ProblemSpec& spec,
                                        const ForwardPathView& path, double dt);

}  // namespace fbsde
