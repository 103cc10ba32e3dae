#include "fbsde/benchmarks.hpp"

#include <cmath>
#include <stdexcept>

#include "fbsde/numeric.hpp"

namespace fbsde {

namespace {

CoefficientSet wealth_coefficients(const MarketParams& params) {
    CoefficientSet c;
    auto b = params.b;
    auto sigma = params.sigma;
    c.alpha = [b](double t, double, double, double, KView, double u) { return u * b(t); };
    c.beta = [sigma](double t, double, double, double, KView, double u) { return u * sigma(t); };
    c.gamma = [](double, double, double, double, KView, double, double) { return 0.0; };
    return c;
}

void check_params(const MarketParams& params) {
    if (!(params.T > 0.0)) throw std::invalid_argument("market params: horizon nonpositive");
    if (!params.b || !params.sigma)
        throw std::invalid_argument("market params: b and sigma must be callable");
    for (int i = 0; i <= 100; ++i) {
        const double t = params.T * i / 100.0;
        if (!(params.sigma(t) > 1e-8))
            throw std::invalid_argument("market params: sigma not bounded away from zero");
    }
}

}  // namespace

ProblemSpec build_merton(const MarketParams& params) {
    check_params(params);
    ProblemSpec spec;
    spec.coefficients = wealth_coefficients(params);
    spec.coefficients.g_driver = [](double, double, double, double, KView, double) { return 0.0; };
    if (params.utility == Utility::log_utility)
        spec.coefficients.h_terminal = [](double x) {
            if (x <= 0.0) throw std::domain_error("log utility: x must be positive");
            return std::log(x);
        };
    else
        spec.coefficients.h_terminal = params.terminal;
    spec.jumps = JumpMeasure{};
    spec.controls = ControlSet::make_interval(-10.0, 10.0, 0.01);
    spec.horizon = params.T;
    spec.x0 = params.x0;
    spec.sense = Sense::maximize;
    spec.deterministic_coefficients = true;
    return spec;
}

double merton_log_value(double t, double x, const MarketParams& params) {
    if (x <= 0.0) throw std::domain_error("merton_log_value: x must be positive");
    if (params.utility != Utility::log_utility)
        throw std::invalid_argument("merton_log_value: log utility only");
    const double integral = trapezoid(
        [&](double s) {
            const double bs = params.b(s);
            const double ss = params.sigma(s);
            return bs * bs / (2.0 * ss * ss);
        },
        t, params.T);
    return std::log(x) + integral;
}

ProblemSpec build_riskmin(const MarketParams& params) {
    check_params(params);
    ProblemSpec spec;
    spec.coefficients = wealth_coefficients(params);
    spec.coefficients.g_driver = [](double, double, double, double z, KView, double) {
        return -0.5 * z * z;
    };
    spec.coefficients.h_terminal = [](double x) { return x; };
    spec.jumps = JumpMeasure{};
    spec.controls = ControlSet::make_interval(-10.0, 10.0, 0.01);
    spec.horizon = params.T;
    spec.x0 = params.x0;
    spec.sense = Sense::maximize;  // minimal risk -Y(0) via maximal Y(0)
    spec.deterministic_coefficients = true;
    return spec;
}

RiskminClosedForm riskmin_closed_form(const MarketParams& params) {
    check_params(params);
    auto b = params.b;
    auto sigma = params.sigma;
    const double T = params.T;
    auto integrand = [b, sigma](double s) {
        const double theta = b(s) / sigma(s);
        return 0.5 * theta * theta;
    };
    RiskminClosedForm cf;
    cf.a = [integrand, T](double t) { return trapezoid(integrand, t, T); };
    cf.y_hat = [a = cf.a](double t, double x) { return x + a(t); };
    // Same lattice count as the entropy quadrature so the identity
    // -rho_min - x0 = H(Q|P) holds to the stated tolerance.
    cf.rho_min = -params.x0 - trapezoid(integrand, 0.0, T);
    cf.u_hat = [b, sigma](double t) {
        const double s = sigma(t);
        return b(t) / (s * s);
    };
    return cf;
}

SpaceTimeGrid merton_default_grid(const MarketParams& params, std::size_t space_nodes,
                                  std::size_t time_steps) {
    // Log-utility singularity at zero stays off-grid. The step count keeps the
    // explicit scheme stable where y'' is small (large x) and the optimizer
    // response to curvature noise is strongest.
    return SpaceTimeGrid::uniform(params.T, time_steps, 0.2, 5.0, space_nodes);
}

SpaceTimeGrid riskmin_default_grid(const MarketParams& params, std::size_t space_nodes,
                                   std::size_t time_steps) {
    // Wide enough that the explicit step satisfies the diffusion CFL bound on
    // the default 200 x 400 grid.
    return SpaceTimeGrid::uniform(params.T, time_steps, params.x0 - 3.0, params.x0 + 3.0,
                                  space_nodes);
}

}  // namespace fbsde
