#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fbsde/benchmarks.hpp"
#include "fbsde/model.hpp"
#include "fbsde/numeric.hpp"

using namespace fbsde;

namespace {

MarketParams default_market() {
    MarketParams p;
    p.b = [](double) { return 0.05; };
    p.sigma = [](double) { return 0.2; };
    return p;
}

}  // namespace

TEST_CASE("merton spec validates clean") {
    const auto spec = build_merton(default_market());
    const auto report = validate_problem(spec);
    CHECK(report.ok());
    CHECK(report.violations.empty());
}

TEST_CASE("nonpositive horizon is reported") {
    auto spec = build_merton(default_market());
    spec.horizon = 0.0;
    const auto report = validate_problem(spec);
    CHECK(!report.ok());
    CHECK(report.contains("horizon nonpositive"));
}

TEST_CASE("jump atom at zero is reported") {
    auto spec = build_merton(default_market());
    spec.jumps = JumpMeasure::from_atoms({{0.0, 0.5}});
    const auto report = validate_problem(spec);
    CHECK(report.contains("atom at zero"));
}

TEST_CASE("validate_problem is idempotent") {
    auto spec = build_merton(default_market());
    spec.horizon = -1.0;
    spec.jumps = JumpMeasure::from_atoms({{0.0, 1.0}});
    const auto r1 = validate_problem(spec);
    const auto r2 = validate_problem(spec);
    CHECK(r1.violations == r2.violations);
}

TEST_CASE("validator records non-finite coefficient probes without throwing") {
    auto spec = build_merton(default_market());
    spec.coefficients.alpha = [](double, double, double, double, KView, double) {
        return std::numeric_limits<double>::infinity();
    };
    const auto report = validate_problem(spec);
    CHECK(report.contains("alpha non-finite"));

    auto throwing = build_merton(default_market());
    throwing.coefficients.g_driver = [](double, double, double, double, KView,
                                        double) -> double { throw std::runtime_error("boom"); };
    CHECK(validate_problem(throwing).contains("g_driver non-finite"));
}

TEST_CASE("levy_integral single atom") {
    const auto m = JumpMeasure::from_atoms({{1.0, 0.5}});
    CHECK(levy_integral(m, [](double z) { return z * z; }) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("levy_integral empty measure is zero") {
    CHECK(levy_integral(JumpMeasure{}, [](double z) { return 1.0 / z; }) == 0.0);
}

TEST_CASE("levy_integral two atoms") {
    const auto m = JumpMeasure::from_atoms({{-1.0, 0.3}, {2.0, 0.1}});
    CHECK(levy_integral(m, [](double z) { return z; }) == doctest::Approx(-0.1).epsilon(1e-12));
}

TEST_CASE("levy_integral is linear in the integrand") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<JumpAtom> atoms;
        for (int i = 0; i < 4; ++i) {
            double z = unif(gen);
            if (z == 0.0) z = 0.5;
            atoms.push_back({z, std::abs(unif(gen))});
        }
        const auto m = JumpMeasure::from_atoms(atoms);
        const double a = unif(gen), b = unif(gen);
        auto f = [](double z) { return std::sin(z); };
        auto g = [](double z) { return z * z - 1.0; };
        const double lhs = levy_integral(m, [&](double z) { return a * f(z) + b * g(z); });
        const double rhs = a * levy_integral(m, f) + b * levy_integral(m, g);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("levy_integral of one recovers total_intensity exactly") {
    const auto m = JumpMeasure::from_atoms({{0.5, 0.25}, {-0.3, 1.5}, {2.0, 0.125}});
    CHECK(levy_integral(m, [](double) { return 1.0; }) == m.total_intensity);
}

TEST_CASE("levy_integral names the offending atom") {
    const auto m = JumpMeasure::from_atoms({{1.0, 0.5}, {-1.0, 0.5}});
    CHECK_THROWS_WITH_AS(levy_integral(m, [](double z) { return std::log(z); }),
                         doctest::Contains("atom 1"), std::runtime_error);
}

TEST_CASE("grid construction enforces invariants") {
    CHECK_THROWS_AS(SpaceTimeGrid::make({0.1, 1.0}, {0, 0.25, 0.5, 0.75, 1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(SpaceTimeGrid::make({0.0, 0.5, 0.5}, {0, 0.25, 0.5, 0.75, 1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(SpaceTimeGrid::make({0.0, 1.0}, {0, 0.5, 1}), std::invalid_argument);
    CHECK_THROWS_AS(SpaceTimeGrid::make({0.0, 1.0}, {0, 0.2, 0.5, 0.75, 1}),
                    std::invalid_argument);

    const auto g = SpaceTimeGrid::uniform(2.0, 10, -1.0, 1.0, 21);
    CHECK(g.nt() == 11);
    CHECK(g.nx() == 21);
    CHECK(g.horizon() == 2.0);
    CHECK(g.dx == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("control sets") {
    const auto iv = ControlSet::make_interval(-1.0, 1.0, 0.1);
    CHECK(iv.kind == ControlSet::Kind::interval);
    const auto fl = ControlSet::make_finite({2.5, 0.0, 1.0});
    REQUIRE(fl.values.size() == 3);
    CHECK(fl.values.front() == 0.0);  // stored ascending
    CHECK(fl.values.back() == 2.5);
}

TEST_CASE("trapezoid quadrature on polynomials") {
    CHECK(trapezoid([](double) { return 3.0; }, 0.0, 2.0) == doctest::Approx(6.0).epsilon(1e-14));
    CHECK(trapezoid([](double t) { return t * t; }, 0.0, 1.0) ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-8));
}

TEST_CASE("pairwise_sum matches plain sum") {
    std::vector<double> v(1000);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(static_cast<double>(i));
    double plain = 0.0;
    for (double x : v) plain += x;
    CHECK(pairwise_sum(v) == doctest::Approx(plain).epsilon(1e-12));
}

TEST_CASE("interp1_uniform node identity and linearity") {
    std::vector<double> xs{0.0, 0.5, 1.0, 1.5, 2.0};
    std::vector<double> vs{1.0, 2.0, 3.0, 4.0, 5.0};
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto r = interp1_uniform(xs, vs, xs[i]);
        CHECK(r.value == vs[i]);  // bit-exact at nodes
        CHECK(!r.extrapolated);
    }
    CHECK(interp1_uniform(xs, vs, 0.25).value == doctest::Approx(1.5).epsilon(1e-14));
    const auto ex = interp1_uniform(xs, vs, 2.5);
    CHECK(ex.extrapolated);
    CHECK(ex.value == doctest::Approx(6.0).epsilon(1e-12));
}
