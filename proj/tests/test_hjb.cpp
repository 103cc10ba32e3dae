#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "fbsde/benchmarks.hpp"
#include "fbsde/driver.hpp"
#include "fbsde/hjb.hpp"
#include "fbsde/model.hpp"

using namespace fbsde;

namespace {

MarketParams market(double b, double sigma) {
    MarketParams p;
    p.b = [b](double) { return b; };
    p.sigma = [sigma](double) { return sigma; };
    return p;
}

ProblemSpec null_problem(double terminal) {
    ProblemSpec spec;
    auto zero6 = [](double, double, double, double, KView, double) { return 0.0; };
    spec.coefficients.alpha = zero6;
    spec.coefficients.beta = zero6;
    spec.coefficients.gamma = [](double, double, double, double, KView, double, double) {
        return 0.0;
    };
    spec.coefficients.g_driver = zero6;
    spec.coefficients.h_terminal = [terminal](double) { return terminal; };
    spec.controls = ControlSet::make_interval(-1.0, 1.0, 0.5);
    spec.x0 = 0.5;
    return spec;
}

}  // namespace

TEST_CASE("null problem stays constant with smallest-control ties") {
    const auto spec = null_problem(2.5);
    const auto grid = SpaceTimeGrid::uniform(1.0, 10, 0.0, 1.0, 11);
    const auto report = solve(spec, grid);
    for (std::size_t ti = 0; ti < grid.nt(); ++ti)
        for (std::size_t xi = 0; xi < grid.nx(); ++xi) {
            CHECK(report.field.y_at(ti, xi) == 2.5);
            CHECK(report.control_field[ti * grid.nx() + xi] == -1.0);
        }
    CHECK(report.y0_at_x0 == 2.5);
}

TEST_CASE("terminal layer equals h bit-exactly") {
    const auto params = market(0.2, 0.4);
    const auto spec = build_riskmin(params);
    const auto grid = riskmin_default_grid(params, 50, 100);
    const auto report = solve(spec, grid);
    for (std::size_t xi = 0; xi < grid.nx(); ++xi)
        CHECK(report.field.y_at(grid.nt() - 1, xi) ==
              spec.coefficients.h_terminal(grid.x_nodes[xi]));
}

TEST_CASE("quadratic-risk benchmark value and control") {
    const auto params = market(0.2, 0.4);
    const auto spec = build_riskmin(params);
    const auto grid = riskmin_default_grid(params);
    const auto report = solve(spec, grid);

    CHECK(report.y0_at_x0 == doctest::Approx(1.125).epsilon(1e-3));
    // flat control b / sigma^2 across interior nodes of the first layer
    for (std::size_t xi = 5; xi + 5 < grid.nx(); xi += 10)
        CHECK(report.control_field[1 * grid.nx() + xi] == doctest::Approx(1.25).epsilon(5e-2));
    CHECK(report.diagnostics.time_steps == grid.nt() - 1);
}

TEST_CASE("terminal-utility benchmark value and feedback shape") {
    const auto params = market(0.05, 0.2);
    const auto spec = build_merton(params);
    const auto grid = merton_default_grid(params);
    const auto report = solve(spec, grid);

    const double oracle = merton_log_value(0.0, 1.0, params);
    CHECK(report.y0_at_x0 == doctest::Approx(oracle).epsilon(2e-3));
    CHECK(std::abs(report.y0_at_x0 - oracle) <= 1e-3);

    // u_hat(t, x) tracks b x / sigma^2 = 1.25 x where the field is well
    // curved (large x has |y''| ~ 1/x^2 near zero and a noisier feedback)
    for (std::size_t xi = 20; xi <= 100; xi += 20) {
        const double x = grid.x_nodes[xi];
        CHECK(report.control_field[1 * grid.nx() + xi] ==
              doctest::Approx(1.25 * x).epsilon(2e-2));
    }
}

TEST_CASE("serial reference is bit-identical to the parallel kernel") {
    const auto params = market(0.2, 0.4);
    const auto spec = build_riskmin(params);
    const auto grid = riskmin_default_grid(params, 100, 200);
    const auto a = solve(spec, grid);
    const auto b = solve_reference(spec, grid);
    CHECK(a.y0_at_x0 == b.y0_at_x0);
    CHECK(std::memcmp(a.control_field.data(), b.control_field.data(),
                      a.control_field.size() * sizeof(double)) == 0);
    for (std::size_t ti = 0; ti < grid.nt(); ++ti)
        for (std::size_t xi = 0; xi < grid.nx(); ++xi)
            CHECK(a.field.y_at(ti, xi) == b.field.y_at(ti, xi));
}

TEST_CASE("solver refuses stochastic-coefficient and invalid specs") {
    auto spec = build_riskmin(market(0.2, 0.4));
    const auto grid = riskmin_default_grid(market(0.2, 0.4), 50, 100);
    spec.deterministic_coefficients = false;
    CHECK_THROWS_AS(solve(spec, grid), std::invalid_argument);

    auto bad = build_riskmin(market(0.2, 0.4));
    bad.horizon = -1.0;
    CHECK_THROWS_WITH_AS(solve(bad, grid), doctest::Contains("horizon nonpositive"),
                         std::invalid_argument);
}

TEST_CASE("blow-up guard reports unstable step size") {
    // Stiff linear driver with a step far beyond the stability bound.
    auto spec = null_problem(1.0);
    spec.coefficients.g_driver = [](double, double, double y, double, KView, double) {
        return 1e7 * y;
    };
    const auto grid = SpaceTimeGrid::uniform(1.0, 2, 0.0, 1.0, 11);
    CHECK_THROWS_WITH_AS(solve(spec, grid), doctest::Contains("unstable step size"),
                         std::runtime_error);
}

TEST_CASE("first-order convergence on the quadratic-risk benchmark") {
    // Time-varying drift so the backward quadrature error is the leading term.
    MarketParams params;
    params.b = [](double t) { return 0.2 * t; };
    params.sigma = [](double) { return 0.4; };
    const auto spec = build_riskmin(params);
    const double oracle = riskmin_closed_form(params).y_hat(0.0, params.x0);
    CHECK(oracle == doctest::Approx(1.0 + 1.0 / 24.0).epsilon(1e-9));

    double err[2];
    int i = 0;
    for (auto [nx, nt] : {std::pair<std::size_t, std::size_t>{100, 100}, {200, 200}}) {
        const auto grid = riskmin_default_grid(params, nx, nt);
        err[i++] = std::abs(solve(spec, grid).y0_at_x0 - oracle);
    }
    CHECK(err[0] / err[1] >= 1.8);
}

TEST_CASE("hypothesis checker flags jump and z-dependence structure") {
    const auto merton = build_merton(market(0.05, 0.2));
    auto hr = check_comparison_hypotheses(merton);
    CHECK(hr.no_jumps);
    CHECK(hr.alpha_independent_of_z);
    CHECK(!hr.lipschitz_declared);

    auto jumpy = merton;
    jumpy.jumps = JumpMeasure::from_atoms({{0.5, 1.0}});
    CHECK(!check_comparison_hypotheses(jumpy).no_jumps);

    auto z_drift = merton;
    z_drift.coefficients.alpha = [](double, double, double, double z, KView, double) {
        return z;
    };
    CHECK(!check_comparison_hypotheses(z_drift).alpha_independent_of_z);

    HypothesisDeclarations decl;
    decl.bounded = true;
    decl.square_integrable = true;
    const auto echoed = check_comparison_hypotheses(build_riskmin(market(0.2, 0.4)), decl);
    CHECK(echoed.bounded_declared);
    CHECK(echoed.square_integrability_declared);
    CHECK(!echoed.lipschitz_declared);
}

TEST_CASE("comparison of constant terminal shift") {
    const auto spec1 = null_problem(0.0);
    const auto spec2 = null_problem(1.0);
    const auto grid = SpaceTimeGrid::uniform(1.0, 20, 0.0, 1.0, 11);
    const auto rep = verify_comparison(spec1, spec2, grid);
    CHECK(rep.hypothesis_ok);
    CHECK(rep.pass);
    CHECK(rep.min_gap == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("comparison on the terminal-utility benchmark with shifted terminal") {
    const auto params = market(0.05, 0.2);
    const auto spec1 = build_merton(params);
    auto spec2 = spec1;
    spec2.coefficients.h_terminal = [](double x) { return std::log(x) + 0.1; };
    const auto grid = merton_default_grid(params, 100, 4000);
    const auto rep = verify_comparison(spec1, spec2, grid);
    CHECK(rep.hypothesis_ok);
    CHECK(rep.pass);
    // additive shift propagates unchanged through the y-independent driver
    CHECK(rep.min_gap == doctest::Approx(0.1).epsilon(1e-6));
}

TEST_CASE("comparison of constant driver shift reproduces the time profile") {
    const auto spec1 = null_problem(0.0);
    auto spec2 = spec1;
    spec2.coefficients.g_driver = [](double, double, double, double, KView, double) {
        return 0.01;
    };
    const auto grid = SpaceTimeGrid::uniform(1.0, 50, 0.0, 1.0, 11);
    const auto rep = verify_comparison(spec1, spec2, grid);
    CHECK(rep.hypothesis_ok);
    CHECK(rep.pass);
    // gap is 0.01 (T - t): zero at T, 0.01 T at t = 0
    const auto r1 = solve(spec1, grid);
    const auto r2 = solve(spec2, grid);
    for (std::size_t ti = 0; ti < grid.nt(); ti += 10) {
        const double expected = 0.01 * (1.0 - grid.t_nodes[ti]);
        CHECK(r2.field.y_at(ti, 5) - r1.field.y_at(ti, 5) ==
              doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("violated driver ordering yields no verdict") {
    const auto spec1 = null_problem(1.0);
    const auto spec2 = null_problem(0.0);  // h2 < h1
    const auto grid = SpaceTimeGrid::uniform(1.0, 10, 0.0, 1.0, 11);
    const auto rep = verify_comparison(spec1, spec2, grid);
    CHECK(!rep.hypothesis_ok);
    CHECK(!rep.pass);
}

TEST_CASE("transformed and classical feedback formulas coincide") {
    const auto params = market(0.05, 0.2);
    const auto report = solve(build_merton(params), merton_default_grid(params, 100, 2000));
    const auto cc = classical_hjb_crosscheck(report, params.b, params.sigma);
    CHECK(cc.nodes_checked > 0);
    CHECK(cc.max_discrepancy <= 1e-12);

    const auto zero_b = market(0.0, 0.2);
    const auto r0 = solve(build_merton(zero_b), merton_default_grid(zero_b, 100, 2000));
    for (std::size_t xi = 0; xi < 100; xi += 7)
        CHECK(r0.control_field[1 * 100 + xi] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("recorded controls satisfy dominance on a sampled layer") {
    const auto params = market(0.2, 0.4);
    const auto spec = build_riskmin(params);
    const auto grid = riskmin_default_grid(params, 60, 120);
    const auto report = solve(spec, grid);
    for (std::size_t ti : {std::size_t{1}, grid.nt() / 2, grid.nt() - 1}) {
        const auto deriv = estimate_derivatives(report.field, ti);
        const auto ctx = make_context(spec, report.field, deriv, ti);
        for (std::size_t xi = 0; xi < grid.nx(); xi += 13) {
            const double u_rec = report.control_field[ti * grid.nx() + xi];
            const double g_rec = eval_driver(ctx, xi, u_rec);
            for (int j = 0; j < 25; ++j) {
                const double v =
                    spec.controls.lo + (spec.controls.hi - spec.controls.lo) * j / 24.0;
                CHECK(g_rec >= eval_driver(ctx, xi, v) - 1e-9);
            }
        }
    }
}
