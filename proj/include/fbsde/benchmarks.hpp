#pragma once

#include <functional>

#include "fbsde/model.hpp"

namespace fbsde {

enum class Utility { log_utility, custom };

// Two-asset market: riskless unit bond and a risky asset with drift b(t) and
// volatility sigma(t); the control is the amount held in the risky asset.
struct MarketParams {
    std::function<double(double)> b;
    std::function<double(double)> sigma;
    double T = 1.0;
    double x0 = 1.0;
    Utility utility = Utility::log_utility;
    std::function<double(double)> terminal;  // used when utility == custom
};

// Terminal-utility maximization: wealth dynamics dX = u (b dt + sigma dB),
// trivial driver, terminal U(X(T)).
ProblemSpec build_merton(const MarketParams& params);

// Closed-form log-utility value  ln x + int_t^T b^2 / (2 sigma^2).
double merton_log_value(double t, double x, const MarketParams& params);

// Entropic risk minimization: same wealth dynamics, driver g(z) = -z^2/2,
// terminal h(x) = x; minimizing -Y(0) is maximizing Y(0).
ProblemSpec build_riskmin(const MarketParams& params);

struct RiskminClosedForm {
    std::function<double(double)> a;      // a(t) = int_t^T (b/sigma)^2 / 2
    std::function<double(double, double)> y_hat;  // x + a(t)
    double rho_min = 0.0;                 // -x0 - a(0)
    std::function<double(double)> u_hat;  // b(t) / sigma(t)^2
};

RiskminClosedForm riskmin_closed_form(const MarketParams& params);

// Default grids sized so the explicit backward stepping is stable on the
// benchmark coefficients.
SpaceTimeGrid merton_default_grid(const MarketParams& params, std::size_t space_nodes = 200,
                                  std::size_t time_steps = 8000);
SpaceTimeGrid riskmin_default_grid(const MarketParams& params, std::size_t space_nodes = 200,
                                   std::size_t time_steps = 400);

}  // namespace fbsde
