#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fbsde/benchmarks.hpp"
#include "fbsde/driver.hpp"
#include "fbsde/field.hpp"
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

}  // namespace

TEST_CASE("terminal-utility spec structure") {
    const auto spec = build_merton(market(0.1, 0.2));
    CHECK(spec.sense == Sense::maximize);
    CHECK(spec.jumps.empty());
    CHECK(spec.deterministic_coefficients);
    const std::vector<double> k;
    // alpha = u b, beta = u sigma, g = 0
    CHECK(spec.coefficients.alpha(0.0, 1.0, 0.0, 0.0, k, 2.0) == doctest::Approx(0.2));
    CHECK(spec.coefficients.beta(0.0, 1.0, 0.0, 0.0, k, 2.0) == doctest::Approx(0.4));
    CHECK(spec.coefficients.g_driver(0.0, 1.0, 0.5, 0.3, k, 2.0) == 0.0);
    CHECK(spec.coefficients.h_terminal(std::exp(1.0)) == doctest::Approx(1.0));
    CHECK_THROWS_AS(spec.coefficients.h_terminal(-1.0), std::domain_error);
}

TEST_CASE("invalid market parameters are rejected") {
    auto p = market(0.1, 0.2);
    p.T = 0.0;
    CHECK_THROWS_AS(build_merton(p), std::invalid_argument);
    auto q = market(0.1, 0.0);
    CHECK_THROWS_AS(build_riskmin(q), std::invalid_argument);
}

TEST_CASE("log-utility value oracle") {
    const auto p = market(0.05, 0.2);
    CHECK(merton_log_value(0.0, 1.0, p) == doctest::Approx(0.03125).epsilon(1e-10));
    CHECK(merton_log_value(1.0, 2.0, p) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    const auto p0 = market(0.0, 0.2);
    for (double t : {0.0, 0.3, 1.0})
        CHECK(merton_log_value(t, 1.5, p0) == doctest::Approx(std::log(1.5)).epsilon(1e-12));
    CHECK_THROWS_AS(merton_log_value(0.0, 0.0, p), std::domain_error);
}

TEST_CASE("zero drift makes the terminal the value everywhere") {
    const auto p = market(0.0, 0.2);
    const auto report = solve(build_merton(p), merton_default_grid(p, 100, 2000));
    for (std::size_t xi = 10; xi < 90; xi += 10)
        CHECK(report.field.y_at(0, xi) ==
              doctest::Approx(std::log(report.field.grid().x_nodes[xi])).epsilon(1e-9));
}

TEST_CASE("quadratic-risk spec structure and driver values") {
    const auto spec = build_riskmin(market(0.2, 0.4));
    const std::vector<double> k;
    CHECK(spec.coefficients.g_driver(0.0, 1.0, 0.0, 0.6, k, 0.0) ==
          doctest::Approx(-0.18).epsilon(1e-14));
    CHECK(spec.coefficients.h_terminal(1.7) == 1.7);
    CHECK(spec.sense == Sense::maximize);
}

TEST_CASE("linear terminal in the utility maximizer saturates the control bound") {
    const auto p = market(0.1, 0.2);
    MarketParams custom = p;
    custom.utility = Utility::custom;
    custom.terminal = [](double x) { return x; };
    const auto spec = build_merton(custom);
    const auto grid = SpaceTimeGrid::uniform(1.0, 2, -1.0, 1.0, 9);
    const auto field = DecouplingField::from_function(grid, [](double, double x) { return x; });
    const auto deriv = estimate_derivatives(field, 0);
    const auto ctx = make_context(spec, field, deriv, 0);
    const auto opt = maximize_driver(ctx, 4);
    CHECK(opt.branch == OptBranch::grid);
    CHECK(opt.u_hat == doctest::Approx(spec.controls.hi));
}

TEST_CASE("closed-form risk minimization") {
    const auto cf = riskmin_closed_form(market(0.2, 0.4));
    CHECK(cf.a(0.0) == doctest::Approx(0.125).epsilon(1e-10));
    CHECK(cf.a(1.0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(cf.y_hat(0.0, 1.0) == doctest::Approx(1.125).epsilon(1e-10));
    CHECK(cf.rho_min == doctest::Approx(-1.125).epsilon(1e-10));
    CHECK(cf.u_hat(0.5) == doctest::Approx(1.25).epsilon(1e-14));
}

TEST_CASE("closed-form risk minimization with zero and linear drift") {
    const auto cf0 = riskmin_closed_form(market(0.0, 0.4));
    CHECK(cf0.a(0.0) == 0.0);
    CHECK(cf0.rho_min == doctest::Approx(-1.0));
    CHECK(cf0.u_hat(0.7) == 0.0);

    MarketParams ramp;
    ramp.b = [](double t) { return 0.2 * t; };
    ramp.sigma = [](double) { return 0.4; };
    const auto cf = riskmin_closed_form(ramp);
    CHECK(cf.a(0.0) == doctest::Approx(1.0 / 24.0).epsilon(1e-9));
}

TEST_CASE("oracle-vs-solver on default grids") {
    const auto pr = market(0.2, 0.4);
    const auto rr = solve(build_riskmin(pr), riskmin_default_grid(pr));
    const auto cfr = riskmin_closed_form(pr);
    CHECK(std::abs(rr.y0_at_x0 - cfr.y_hat(0.0, 1.0)) / cfr.y_hat(0.0, 1.0) <= 1e-3);

    const auto pm = market(0.05, 0.2);
    const auto rm = solve(build_merton(pm), merton_default_grid(pm));
    CHECK(std::abs(rm.y0_at_x0 - merton_log_value(0.0, 1.0, pm)) <= 1e-3);
}

TEST_CASE("discrete operator residual of the oracles shrinks under refinement") {
    // Push each closed form through one backward step of the discrete
    // operator and measure the defect against the exact time derivative.
    const auto params = market(0.2, 0.4);
    const auto spec = build_riskmin(params);
    const auto cf = riskmin_closed_form(params);

    auto residual = [&](std::size_t nx, std::size_t nt) {
        const auto grid = riskmin_default_grid(params, nx, nt);
        const auto field = DecouplingField::from_function(
            grid, [&](double t, double x) { return cf.y_hat(t, x); });
        const std::size_t ti = grid.nt() / 2;
        const auto deriv = estimate_derivatives(field, ti);
        const auto ctx = make_context(spec, field, deriv, ti);
        const double dt = grid.t_nodes[ti] - grid.t_nodes[ti - 1];
        double worst = 0.0;
        for (std::size_t xi = 2; xi + 2 < grid.nx(); ++xi) {
            const auto opt = maximize_driver(ctx, xi);
            const double stepped = field.y_at(ti, xi) + dt * opt.g_hat;
            worst = std::max(worst, std::abs(stepped - field.y_at(ti - 1, xi)));
        }
        return worst;
    };
    // constant b: the closed form is linear in x and t, discrete defect ~ 0
    CHECK(residual(100, 100) <= 1e-12);

    MarketParams ramp;
    ramp.b = [](double t) { return 0.2 * t; };
    ramp.sigma = [](double) { return 0.4; };
    const auto spec2 = build_riskmin(ramp);
    const auto cf2 = riskmin_closed_form(ramp);
    auto residual2 = [&](std::size_t nt) {
        const auto grid = riskmin_default_grid(ramp, 50, nt);
        const auto field = DecouplingField::from_function(
            grid, [&](double t, double x) { return cf2.y_hat(t, x); });
        const std::size_t ti = grid.nt() / 2;
        const auto deriv = estimate_derivatives(field, ti);
        const auto ctx = make_context(spec2, field, deriv, ti);
        const double dt = grid.t_nodes[ti] - grid.t_nodes[ti - 1];
        double worst = 0.0;
        for (std::size_t xi = 2; xi + 2 < grid.nx(); ++xi) {
            const auto opt = maximize_driver(ctx, xi);
            worst = std::max(worst,
                             std::abs(field.y_at(ti, xi) + dt * opt.g_hat -
                                      field.y_at(ti - 1, xi)));
        }
        return worst;
    };
    const double r1 = residual2(100);
    const double r2 = residual2(200);
    CHECK(r1 / r2 >= 1.8);  // O(dt^2) per-step defect: halving dt quarters it
}

TEST_CASE("default grids satisfy the construction invariants") {
    const auto pm = market(0.05, 0.2);
    const auto gm = merton_default_grid(pm);
    CHECK(gm.x_nodes.front() > 0.0);  // log singularity off-grid
    const auto pr = market(0.2, 0.4);
    const auto gr = riskmin_default_grid(pr);
    CHECK(gr.nx() == 200);
    CHECK(gr.nt() == 401);
    CHECK(gr.x_nodes.front() == doctest::Approx(-2.0));
    CHECK(gr.x_nodes.back() == doctest::Approx(4.0));
}
