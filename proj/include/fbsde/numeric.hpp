#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace fbsde {

// Composite trapezoid rule on a uniform lattice of `intervals` cells.
inline double trapezoid(const std::function<double(double)>& f, double a, double b,
                        std::size_t intervals = 20000) {
    if (intervals == 0 || a == b) return 0.0;
    const double h = (b - a) / static_cast<double>(intervals);
    double sum = 0.5 * (f(a) + f(b));
    for (std::size_t i = 1; i < intervals; ++i) sum += f(a + static_cast<double>(i) * h);
    return sum * h;
}

// Pairwise summation; result is independent of thread count as long as the
// input ordering is fixed.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

struct MeanStderr {
    double mean = 0.0;
    double std_err = 0.0;
};

inline MeanStderr mean_stderr(std::span<const double> v) {
    MeanStderr out;
    const auto n = static_cast<double>(v.size());
    if (v.empty()) return out;
    out.mean = pairwise_sum(v) / n;
    if (v.size() < 2) return out;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = v[i] - out.mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / (n - 1.0);
    out.std_err = std::sqrt(var / n);
    return out;
}

// Linear interpolation on a strictly increasing uniform abscissa, with linear
// extrapolation from the two nearest nodes outside the range.
struct Interp1Result {
    double value = 0.0;
    bool extrapolated = false;
};

// Node location and weights for linear interpolation / extrapolation. When
// `x` coincides bitwise with a stored node the query is exact (w in {0,1}).
struct XLocation {
    std::size_t i0 = 0;
    double w = 0.0;
    bool extrapolated = false;
};

inline XLocation locate_uniform(std::span<const double> xs, double x) {
    const std::size_t n = xs.size();
    const double dx = (xs.back() - xs.front()) / static_cast<double>(n - 1);
    XLocation loc;
    const auto near = static_cast<long>(std::lround((x - xs.front()) / dx));
    if (near >= 0 && near < static_cast<long>(n) && x == xs[static_cast<std::size_t>(near)]) {
        loc.i0 = std::min(static_cast<std::size_t>(near), n - 2);
        loc.w = (loc.i0 == static_cast<std::size_t>(near)) ? 0.0 : 1.0;
        return loc;
    }
    const double tol = 1e-12 * (std::abs(xs.front()) + std::abs(xs.back()) + 1.0);
    if (x <= xs.front()) {
        loc.i0 = 0;
        loc.extrapolated = x < xs.front() - tol;
    } else if (x >= xs.back()) {
        loc.i0 = n - 2;
        loc.extrapolated = x > xs.back() + tol;
    } else {
        auto i = static_cast<long>(std::floor((x - xs.front()) / dx));
        if (i < 0) i = 0;
        if (i > static_cast<long>(n) - 2) i = static_cast<long>(n) - 2;
        loc.i0 = static_cast<std::size_t>(i);
    }
    loc.w = (x - xs[loc.i0]) / dx;
    return loc;
}

inline Interp1Result interp1_uniform(std::span<const double> xs, std::span<const double> vs,
                                     double x) {
    const XLocation loc = locate_uniform(xs, x);
    if (loc.w == 0.0) return {vs[loc.i0], loc.extrapolated};
    return {(1.0 - loc.w) * vs[loc.i0] + loc.w * vs[loc.i0 + 1], loc.extrapolated};
}

}  // namespace fbsde
