#include "fbsde/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fbsde/numeric.hpp"

namespace fbsde {

namespace {

void check_solvable(const ProblemSpec& spec) {
    if (!spec.deterministic_coefficients)
        throw std::invalid_argument(
            "solve: stochastic-coefficient problems are not solved numerically; "
            "set deterministic_coefficients");
    const ValidationReport report = validate_problem(spec);
    if (!report.ok())
        throw std::invalid_argument("solve: invalid problem: " + report.violations.front());
}

void set_terminal_layer(const ProblemSpec& spec, DecouplingField& field) {
    const std::size_t last = field.nt() - 1;
    for (std::size_t xi = 0; xi < field.nx(); ++xi)
        field.y_at(last, xi) = spec.coefficients.h_terminal(field.grid().x_nodes[xi]);
}

void guard_layer(const DecouplingField& field, std::size_t layer, double prev_max) {
    double cur_max = 0.0;
    for (double v : field.y_row(layer)) {
        if (!std::isfinite(v))
            throw std::runtime_error("solve: non-finite value in layer " + std::to_string(layer));
        cur_max = std::max(cur_max, std::abs(v));
    }
    if (cur_max > 1e6 * std::max(1.0, prev_max))
        throw std::runtime_error("solve: unstable step size");
}

double layer_max(const DecouplingField& field, std::size_t layer) {
    double m = 0.0;
    for (double v : field.y_row(layer)) m = std::max(m, std::abs(v));
    return m;
}

void fill_controls_at(const ProblemSpec& spec, const DecouplingField& field,
                      std::vector<double>& control_field, std::size_t layer,
                      EvalCounters* counters, SolveDiagnostics& diag) {
    const DerivativeLayer deriv = estimate_derivatives(field, layer);
    const DriverContext ctx = make_context(spec, field, deriv, layer, counters);
    for (std::size_t xi = 0; xi < field.nx(); ++xi) {
        const DriverOptimum opt = maximize_driver(ctx, xi);
        control_field[layer * field.nx() + xi] = opt.u_hat;
        switch (opt.branch) {
            case OptBranch::vertex_max: ++diag.vertex_max_count; break;
            case OptBranch::vertex_min: ++diag.vertex_min_count; break;
            case OptBranch::grid: ++diag.grid_count; break;
        }
    }
}

}  // namespace

SolveReport solve(const ProblemSpec& spec, const SpaceTimeGrid& grid, const SolveOptions& options) {
    check_solvable(spec);
    const std::size_t nt = grid.nt();
    const std::size_t nx = grid.nx();

    SolveReport report{DecouplingField(grid, spec.jumps.size(), FieldMode::deterministic),
                       std::vector<double>(nt * nx, 0.0), 0.0, {}};
    DecouplingField& field = report.field;
    set_terminal_layer(spec, field);

    EvalCounters counters;
    report.diagnostics.time_steps = nt - 1;
    report.diagnostics.max_abs_driver.resize(nt - 1, 0.0);

    for (std::size_t n = nt - 1; n-- > 0;) {
        const std::size_t src = n + 1;
        const double dt = grid.t_nodes[src] - grid.t_nodes[n];
        const double prev_max = layer_max(field, src);
        const DerivativeLayer deriv = estimate_derivatives(field, src);
        const DriverContext ctx = make_context(spec, field, deriv, src, &counters);

        double max_g = 0.0;
        std::size_t n_vmax = 0, n_vmin = 0, n_grid = 0;
        std::exception_ptr error;
#ifdef _OPENMP
#pragma omp parallel for if (options.parallel) schedule(static) \
    reduction(max : max_g) reduction(+ : n_vmax, n_vmin, n_grid)
#endif
        for (long xi = 0; xi < static_cast<long>(nx); ++xi) {
            try {
                const auto i = static_cast<std::size_t>(xi);
                const DriverOptimum opt = maximize_driver(ctx, i);
                field.y_at(n, i) = field.y_at(src, i) + dt * opt.g_hat;
                report.control_field[src * nx + i] = opt.u_hat;
                max_g = std::max(max_g, std::abs(opt.g_hat));
                switch (opt.branch) {
                    case OptBranch::vertex_max: ++n_vmax; break;
                    case OptBranch::vertex_min: ++n_vmin; break;
                    case OptBranch::grid: ++n_grid; break;
                }
            } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
                if (!error) error = std::current_exception();
            }
        }
        if (error) std::rethrow_exception(error);

        report.diagnostics.max_abs_driver[n] = max_g;
        report.diagnostics.vertex_max_count += n_vmax;
        report.diagnostics.vertex_min_count += n_vmin;
        report.diagnostics.grid_count += n_grid;
        guard_layer(field, n, prev_max);
    }

    fill_controls_at(spec, field, report.control_field, 0, &counters, report.diagnostics);
    report.diagnostics.extrapolation_fraction = counters.fraction();
    report.y0_at_x0 = field.eval_y(0.0, spec.x0);
    return report;
}

SolveReport solve_reference(const ProblemSpec& spec, const SpaceTimeGrid& grid) {
    check_solvable(spec);
    const std::size_t nt = grid.nt();
    const std::size_t nx = grid.nx();

    SolveReport report{DecouplingField(grid, spec.jumps.size(), FieldMode::deterministic),
                       std::vector<double>(nt * nx, 0.0), 0.0, {}};
    DecouplingField& field = report.field;
    set_terminal_layer(spec, field);

    EvalCounters counters;
    report.diagnostics.time_steps = nt - 1;
    report.diagnostics.max_abs_driver.resize(nt - 1, 0.0);

    for (std::size_t n = nt - 1; n-- > 0;) {
        const std::size_t src = n + 1;
        const double dt = grid.t_nodes[src] - grid.t_nodes[n];
        const double prev_max = layer_max(field, src);
        const DerivativeLayer deriv = estimate_derivatives(field, src);
        const DriverContext ctx = make_context(spec, field, deriv, src, &counters);

        double max_g = 0.0;
        for (std::size_t xi = 0; xi < nx; ++xi) {
            const DriverOptimum opt = maximize_driver(ctx, xi);
            field.y_at(n, xi) = field.y_at(src, xi) + dt * opt.g_hat;
            report.control_field[src * nx + xi] = opt.u_hat;
            max_g = std::max(max_g, std::abs(opt.g_hat));
            switch (opt.branch) {
                case OptBranch::vertex_max: ++report.diagnostics.vertex_max_count; break;
                case OptBranch::vertex_min: ++report.diagnostics.vertex_min_count; break;
                case OptBranch::grid: ++report.diagnostics.grid_count; break;
            }
        }
        report.diagnostics.max_abs_driver[n] = max_g;
        guard_layer(field, n, prev_max);
    }

    fill_controls_at(spec, field, report.control_field, 0, &counters, report.diagnostics);
    report.diagnostics.extrapolation_fraction = counters.fraction();
    report.y0_at_x0 = field.eval_y(0.0, spec.x0);
    return report;
}

HypothesisReport check_comparison_hypotheses(const ProblemSpec& spec,
                                             const HypothesisDeclarations& declared) {
    HypothesisReport report;
    report.no_jumps = spec.jumps.empty();
    report.lipschitz_declared = declared.lipschitz;
    report.bounded_declared = declared.bounded;
    report.square_integrability_declared = declared.square_integrable;

    // Numeric probe: alpha may not depend on z.
    report.alpha_independent_of_z = true;
    const double T = spec.horizon > 0.0 ? spec.horizon : 1.0;
    const std::vector<double> kzero(spec.jumps.size(), 0.0);
    std::vector<double> u_probes;
    if (spec.controls.kind == ControlSet::Kind::interval)
        u_probes = {spec.controls.lo, 0.5 * (spec.controls.lo + spec.controls.hi),
                    spec.controls.hi};
    else
        u_probes = spec.controls.values;
    for (double t : {0.0, 0.5 * T, T})
        for (double x : {0.75 * spec.x0, spec.x0, spec.x0 + 0.5})
            for (double y : {-1.0, 0.0, 1.0})
                for (double z : {-0.5, 0.0, 1.0})
                    for (double dz : {0.5, 1.0})
                        for (double u : u_probes) {
                            const double a0 = spec.coefficients.alpha(t, x, y, z, kzero, u);
                            const double a1 = spec.coefficients.alpha(t, x, y, z + dz, kzero, u);
                            if (!(std::abs(a1 - a0) < 1e-12)) {
                                report.alpha_independent_of_z = false;
                                return report;
                            }
                        }
    return report;
}

ComparisonReport verify_comparison(const ProblemSpec& spec1, const ProblemSpec& spec2,
                                   const SpaceTimeGrid& grid) {
    ComparisonReport out;
    double max_dt = 0.0;
    for (std::size_t n = 1; n < grid.nt(); ++n)
        max_dt = std::max(max_dt, grid.t_nodes[n] - grid.t_nodes[n - 1]);
    out.tol = 10.0 * max_dt;

    // Hypothesis spot checks: terminal ordering on the grid, driver ordering
    // on probe fields (linear and terminal-shaped) at a sample of controls.
    out.hypothesis_ok = true;
    for (double x : grid.x_nodes)
        if (spec1.coefficients.h_terminal(x) > spec2.coefficients.h_terminal(x) + 1e-12) {
            out.hypothesis_ok = false;
            return out;
        }

    std::vector<std::function<double(double, double)>> probe_fields = {
        [](double, double x) { return x; },
        [&](double, double x) { return spec2.coefficients.h_terminal(x); }};
    std::vector<double> u_probes;
    if (spec1.controls.kind == ControlSet::Kind::interval)
        for (int j = 0; j < 9; ++j)
            u_probes.push_back(spec1.controls.lo +
                               (spec1.controls.hi - spec1.controls.lo) * j / 8.0);
    else
        u_probes = spec1.controls.values;

    const std::size_t t_indices[] = {0, grid.nt() / 2, grid.nt() - 2};
    for (const auto& fn : probe_fields) {
        DecouplingField probe1 = DecouplingField::from_function(grid, fn);
        // Atom counts can differ between the two specs, so each gets a field
        // with its own k dimensions (zero-filled either way).
        DecouplingField f1(grid, spec1.jumps.size(), FieldMode::deterministic);
        DecouplingField f2(grid, spec2.jumps.size(), FieldMode::deterministic);
        for (std::size_t ti = 0; ti < grid.nt(); ++ti)
            for (std::size_t xi = 0; xi < grid.nx(); ++xi)
                f1.y_at(ti, xi) = f2.y_at(ti, xi) = probe1.y_at(ti, xi);
        for (std::size_t ti : t_indices) {
            const DerivativeLayer d1 = estimate_derivatives(f1, ti);
            const DerivativeLayer d2 = estimate_derivatives(f2, ti);
            const DriverContext c1 = make_context(spec1, f1, d1, ti);
            const DriverContext c2 = make_context(spec2, f2, d2, ti);
            const std::size_t stride = std::max<std::size_t>(1, grid.nx() / 16);
            for (std::size_t xi = 0; xi < grid.nx(); xi += stride)
                for (double u : u_probes)
                    if (eval_driver(c1, xi, u) > eval_driver(c2, xi, u) + 1e-9) {
                        out.hypothesis_ok = false;
                        return out;
                    }
        }
    }

    const SolveReport r1 = solve(spec1, grid);
    const SolveReport r2 = solve(spec2, grid);
    bool first = true;
    for (std::size_t ti = 0; ti < grid.nt(); ++ti)
        for (std::size_t xi = 0; xi < grid.nx(); ++xi) {
            const double gap = r2.field.y_at(ti, xi) - r1.field.y_at(ti, xi);
            if (first || gap < out.min_gap) {
                out.min_gap = gap;
                out.t_index = ti;
                out.x_index = xi;
                first = false;
            }
        }
    out.pass = out.min_gap >= -out.tol;
    return out;
}

CrosscheckReport classical_hjb_crosscheck(const SolveReport& report,
                                          const std::function<double(double)>& b,
                                          const std::function<double(double)>& sigma) {
    CrosscheckReport out;
    const DecouplingField& field = report.field;
    for (std::size_t ti = 0; ti < field.nt(); ++ti) {
        const double t = field.grid().t_nodes[ti];
        const double bt = b(t);
        const double st = sigma(t);
        const DerivativeLayer deriv = estimate_derivatives(field, ti);
        for (std::size_t xi = 1; xi + 1 < field.nx(); ++xi) {
            const double yp = deriv.y_prime[xi];
            const double ypp = deriv.y_double_prime[xi];
            const double zp = deriv.z_prime[xi];
            if (ypp == 0.0) continue;
            const double u_transformed = -(yp * bt + zp * st) / (ypp * st * st);
            const double u_classical = -(bt * yp) / (ypp * st * st);
            if (!std::isfinite(u_transformed) || !std::isfinite(u_classical)) continue;
            out.max_discrepancy =
                std::max(out.max_discrepancy, std::abs(u_transformed - u_classical));
            ++out.nodes_checked;
        }
    }
    return out;
}

}  // namespace fbsde
