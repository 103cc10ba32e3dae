#include "fbsde/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace fbsde {

JumpMeasure JumpMeasure::from_atoms(std::vector<JumpAtom> atoms) {
    JumpMeasure m;
    m.atoms = std::move(atoms);
    m.total_intensity = 0.0;
    for (const auto& a : m.atoms) m.total_intensity += a.weight;
    return m;
}

ControlSet ControlSet::make_interval(double lo, double hi, double resolution) {
    ControlSet c;
    c.kind = Kind::interval;
    c.lo = lo;
    c.hi = hi;
    c.resolution = resolution;
    return c;
}

ControlSet ControlSet::make_finite(std::vector<double> values) {
    ControlSet c;
    c.kind = Kind::finite_list;
    c.values = std::move(values);
    std::sort(c.values.begin(), c.values.end());
    return c;
}

SpaceTimeGrid SpaceTimeGrid::make(std::vector<double> t_nodes, std::vector<double> x_nodes) {
    if (t_nodes.size() < 2) throw std::invalid_argument("grid: need at least one time step");
    if (t_nodes.front() != 0.0) throw std::invalid_argument("grid: t_0 must be 0");
    for (std::size_t i = 1; i < t_nodes.size(); ++i)
        if (t_nodes[i] <= t_nodes[i - 1])
            throw std::invalid_argument("grid: time nodes not strictly increasing");
    if (x_nodes.size() < 5)
        throw std::invalid_argument("grid: need at least 5 spatial nodes");
    const std::size_t n = x_nodes.size();
    const double dx = (x_nodes.back() - x_nodes.front()) / static_cast<double>(n - 1);
    if (dx <= 0.0) throw std::invalid_argument("grid: x nodes not increasing");
    for (std::size_t i = 1; i < n; ++i) {
        const double step = x_nodes[i] - x_nodes[i - 1];
        if (std::abs(step - dx) > 1e-12 * std::max(1.0, std::abs(dx)))
            throw std::invalid_argument("grid: x spacing not uniform");
    }
    SpaceTimeGrid g;
    g.t_nodes = std::move(t_nodes);
    g.x_nodes = std::move(x_nodes);
    g.dx = dx;
    return g;
}

SpaceTimeGrid SpaceTimeGrid::uniform(double T, std::size_t time_steps, double x_min, double x_max,
                                     std::size_t space_nodes) {
    if (T <= 0.0) throw std::invalid_argument("grid: horizon nonpositive");
    std::vector<double> t(time_steps + 1), x(space_nodes);
    for (std::size_t i = 0; i <= time_steps; ++i)
        t[i] = T * static_cast<double>(i) / static_cast<double>(time_steps);
    t.back() = T;
    const double dx = (x_max - x_min) / static_cast<double>(space_nodes - 1);
    for (std::size_t i = 0; i < space_nodes; ++i) x[i] = x_min + static_cast<double>(i) * dx;
    x.back() = x_max;
    return make(std::move(t), std::move(x));
}

bool ValidationReport::contains(const std::string& needle) const {
    for (const auto& v : violations)
        if (v.find(needle) != std::string::npos) return true;
    return false;
}

namespace {

std::string fmt_args(double t, double x, double y, double z, double u) {
    std::ostringstream os;
    os << "(t=" << t << ", x=" << x << ", y=" << y << ", z=" << z << ", u=" << u << ")";
    return os.str();
}

// Coefficients must be total on the probe lattice; a throw counts as a
// non-finite output rather than escaping the validator.
template <typename Fn>
double guarded(Fn&& fn) {
    try {
        return fn();
    } catch (...) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

}  // namespace

ValidationReport validate_problem(const ProblemSpec& spec) {
    ValidationReport report;
    auto note = [&](const std::string& s) { report.violations.push_back(s); };

    if (!(spec.horizon > 0.0)) note("horizon nonpositive");

    for (std::size_t i = 0; i < spec.jumps.atoms.size(); ++i) {
        const auto& a = spec.jumps.atoms[i];
        if (a.zeta == 0.0) note("jump measure: atom at zero (index " + std::to_string(i) + ")");
        if (!std::isfinite(a.weight) || a.weight < 0.0)
            note("jump measure: invalid weight at atom " + std::to_string(i));
    }
    double wsum = 0.0;
    for (const auto& a : spec.jumps.atoms) wsum += a.weight;
    if (std::abs(wsum - spec.jumps.total_intensity) >
        1e-12 * std::max(1.0, std::abs(wsum)))
        note("jump measure: total_intensity does not match weight sum");

    std::vector<double> control_probes;
    switch (spec.controls.kind) {
        case ControlSet::Kind::interval:
            if (!(spec.controls.lo < spec.controls.hi)) note("control interval: lo >= hi");
            if (!(spec.controls.resolution > 0.0)) note("control interval: resolution nonpositive");
            control_probes = {spec.controls.lo, 0.5 * (spec.controls.lo + spec.controls.hi),
                              spec.controls.hi};
            break;
        case ControlSet::Kind::finite_list:
            if (spec.controls.values.empty())
                note("control set: finite list empty");
            else
                control_probes = {spec.controls.values.front(), spec.controls.values.back()};
            break;
    }
    if (!report.ok() && control_probes.empty()) control_probes = {0.0};

    if (!spec.coefficients.alpha || !spec.coefficients.beta || !spec.coefficients.gamma ||
        !spec.coefficients.g_driver || !spec.coefficients.h_terminal) {
        note("coefficient set: missing callable");
        return report;
    }

    // Deterministic probe lattice near x0. The lattice stays on the positive
    // side of x0 so that terminal functions with a one-sided domain (log
    // utility) are probed in range.
    const double T = spec.horizon > 0.0 ? spec.horizon : 1.0;
    const double t_probes[] = {0.0, 0.5 * T, T};
    const double x_probes[] = {0.75 * spec.x0, spec.x0, 1.25 * spec.x0, spec.x0 + 0.5};
    const double y_probes[] = {-1.0, 0.0, 1.0};
    const double z_probes[] = {0.0, 0.5};
    const std::vector<double> kzero(spec.jumps.size(), 0.0);

    bool bad_alpha = false, bad_beta = false, bad_gamma = false, bad_g = false, bad_h = false;
    for (double t : t_probes)
        for (double x : x_probes) {
            if (!bad_h && !std::isfinite(guarded([&] { return spec.coefficients.h_terminal(x); }))) {
                note("h_terminal non-finite at x=" + std::to_string(x));
                bad_h = true;
            }
            for (double y : y_probes)
                for (double z : z_probes)
                    for (double u : control_probes) {
                        if (!bad_alpha && !std::isfinite(guarded([&] { return spec.coefficients.alpha(t, x, y, z, kzero, u); }))) {
                            note("alpha non-finite at " + fmt_args(t, x, y, z, u));
                            bad_alpha = true;
                        }
                        if (!bad_beta && !std::isfinite(guarded([&] { return spec.coefficients.beta(t, x, y, z, kzero, u); }))) {
                            note("beta non-finite at " + fmt_args(t, x, y, z, u));
                            bad_beta = true;
                        }
                        if (!bad_g && !std::isfinite(guarded([&] { return spec.coefficients.g_driver(t, x, y, z, kzero, u); }))) {
                            note("g_driver non-finite at " + fmt_args(t, x, y, z, u));
                            bad_g = true;
                        }
                        if (!bad_gamma)
                            for (const auto& atom : spec.jumps.atoms)
                                if (!std::isfinite(guarded([&] {
                                        return spec.coefficients.gamma(t, x, y, z, kzero, u,
                                                                       atom.zeta);
                                    }))) {
                                    note("gamma non-finite at " + fmt_args(t, x, y, z, u) +
                                         " zeta=" + std::to_string(atom.zeta));
                                    bad_gamma = true;
                                    break;
                                }
                    }
        }

    return report;
}

double levy_integral(const JumpMeasure& measure, const std::function<double(double)>& integrand) {
    double sum = 0.0;
    for (std::size_t i = 0; i < measure.atoms.size(); ++i) {
        const double v = integrand(measure.atoms[i].zeta);
        if (!std::isfinite(v))
            throw std::runtime_error("levy_integral: non-finite integrand at atom " +
                                     std::to_string(i) + " (zeta=" +
                                     std::to_string(measure.atoms[i].zeta) + ")");
        sum += measure.atoms[i].weight * v;
    }
    return sum;
}

}  // namespace fbsde
