#include "fbsde/driver.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fbsde/numeric.hpp"

namespace fbsde {

DriverContext make_context(const ProblemSpec& spec, const DecouplingField& field,
                           const DerivativeLayer& deriv, std::size_t time_index,
                           EvalCounters* counters) {
    DriverContext ctx;
    ctx.spec = &spec;
    ctx.x_nodes = field.grid().x_nodes;
    ctx.y_row = field.y_row(time_index);
    ctx.z_row = field.z_row(time_index);
    ctx.k_row = field.k_row(time_index);
    ctx.deriv = &deriv;
    ctx.t = field.grid().t_nodes[time_index];
    ctx.counters = counters;
    return ctx;
}

namespace {

[[noreturn]] void bad_coefficient(const char* name, double t, double x, double u) {
    throw std::runtime_error(std::string("eval_driver: coefficient '") + name +
                             "' returned a non-finite value at t=" + std::to_string(t) +
                             ", x=" + std::to_string(x) + ", u=" + std::to_string(u));
}

}  // namespace

double eval_driver(const DriverContext& ctx, std::size_t x_index, double u) {
    const ProblemSpec& spec = *ctx.spec;
    const std::size_t n_atoms = spec.jumps.size();
    const double t = ctx.t;
    const double x = ctx.x_nodes[x_index];
    const double y = ctx.y_row[x_index];
    const double z = ctx.z_row[x_index];
    const KView k_here = ctx.k_row.subspan(x_index * n_atoms, n_atoms);

    const double alpha = spec.coefficients.alpha(t, x, y, z, k_here, u);
    if (!std::isfinite(alpha)) bad_coefficient("alpha", t, x, u);
    const double beta = spec.coefficients.beta(t, x, y, z, k_here, u);
    if (!std::isfinite(beta)) bad_coefficient("beta", t, x, u);

    const double yp = ctx.deriv->y_prime[x_index];
    const double ypp = ctx.deriv->y_double_prime[x_index];
    const double zp = ctx.deriv->z_prime[x_index];
    const double z_tilde = lift_Z(z, yp, beta);

    double jump_taylor = 0.0;
    double jump_k = 0.0;
    std::vector<double> k_tilde(n_atoms);
    for (std::size_t a = 0; a < n_atoms; ++a) {
        const JumpAtom& atom = spec.jumps.atoms[a];
        const double gamma = spec.coefficients.gamma(t, x, y, z, k_here, u, atom.zeta);
        if (!std::isfinite(gamma)) bad_coefficient("gamma", t, x, u);
        const XLocation loc = locate_uniform(ctx.x_nodes, x + gamma);
        if (ctx.counters) {
            ctx.counters->queries.fetch_add(1, std::memory_order_relaxed);
            if (loc.extrapolated)
                ctx.counters->extrapolated.fetch_add(1, std::memory_order_relaxed);
        }
        const double wlo = 1.0 - loc.w;
        const double y_shift = wlo * ctx.y_row[loc.i0] + loc.w * ctx.y_row[loc.i0 + 1];
        const double k_shift = n_atoms == 0
                                   ? 0.0
                                   : wlo * ctx.k_row[loc.i0 * n_atoms + a] +
                                         loc.w * ctx.k_row[(loc.i0 + 1) * n_atoms + a];
        jump_taylor += atom.weight * (y_shift - y - yp * gamma);
        jump_k += atom.weight * (k_shift - k_here[a]);
        k_tilde[a] = y_shift - y + k_shift;
    }

    const double g = spec.coefficients.g_driver(t, x, y, z_tilde, k_tilde, u);
    if (!std::isfinite(g)) bad_coefficient("g_driver", t, x, u);

    return g + yp * alpha + 0.5 * ypp * beta * beta + zp * beta + jump_taylor + jump_k;
}

namespace {

DriverOptimum grid_search(const DriverContext& ctx, std::size_t x_index, double sense_sign) {
    const ControlSet& cs = ctx.spec->controls;
    DriverOptimum best;
    bool first = true;
    auto consider = [&](double u) {
        const double g = eval_driver(ctx, x_index, u);
        // Strict improvement keeps the smallest u on ties (ascending sweep).
        if (first || sense_sign * g > sense_sign * best.g_hat) {
            best.u_hat = u;
            best.g_hat = g;
            first = false;
        }
    };
    if (cs.kind == ControlSet::Kind::finite_list) {
        for (double u : cs.values) consider(u);
    } else {
        const auto steps = static_cast<std::size_t>((cs.hi - cs.lo) / cs.resolution + 1e-9);
        for (std::size_t m = 0; m <= steps; ++m)
            consider(cs.lo + static_cast<double>(m) * cs.resolution);
        if (cs.lo + static_cast<double>(steps) * cs.resolution < cs.hi - 1e-12 * cs.resolution)
            consider(cs.hi);
    }
    best.branch = OptBranch::grid;
    return best;
}

}  // namespace

DriverOptimum maximize_driver(const DriverContext& ctx, std::size_t x_index) {
    const ControlSet& cs = ctx.spec->controls;
    const double sense_sign = ctx.spec->sense == Sense::maximize ? 1.0 : -1.0;
    if (cs.kind == ControlSet::Kind::finite_list) {
        if (cs.values.empty()) throw std::invalid_argument("maximize_driver: empty control set");
        return grid_search(ctx, x_index, sense_sign);
    }

    // Five-point probe; exact quadratics admit the closed-form vertex.
    const double h = 0.25 * (cs.hi - cs.lo);
    double us[5], gs[5];
    double scale = 1.0;
    for (int j = 0; j < 5; ++j) {
        us[j] = cs.lo + static_cast<double>(j) * h;
        gs[j] = eval_driver(ctx, x_index, us[j]);
        scale = std::max(scale, std::abs(gs[j]));
    }
    const double a2 = (gs[0] - 2.0 * gs[2] + gs[4]) / (2.0 * (2.0 * h) * (2.0 * h));
    const double a1 = (gs[4] - gs[0]) / (4.0 * h);
    auto fit = [&](double u) {
        const double d = u - us[2];
        return gs[2] + a1 * d + a2 * d * d;
    };
    const double resid = std::max(std::abs(fit(us[1]) - gs[1]), std::abs(fit(us[3]) - gs[3]));

    if (resid <= 1e-10 * scale) {
        const bool curved = std::abs(a2) * (cs.hi - cs.lo) * (cs.hi - cs.lo) > 1e-12 * scale;
        if (curved && sense_sign * a2 < 0.0) {
            double vertex = us[2] - a1 / (2.0 * a2);
            vertex = std::clamp(vertex, cs.lo, cs.hi);
            DriverOptimum opt;
            opt.u_hat = vertex;
            opt.g_hat = eval_driver(ctx, x_index, vertex);
            opt.branch = a2 < 0.0 ? OptBranch::vertex_max : OptBranch::vertex_min;
            return opt;
        }
        // Flat or wrong-curvature quadratic: the optimum sits on the boundary;
        // the grid sweep handles it (and breaks ties toward the smallest u).
    }
    return grid_search(ctx, x_index, sense_sign);
}

PathResidualStats ito_ventzell_residual(const DecouplingField& field, const ProblemSpec& spec,
                                        const ForwardPathView& path, double dt) {
    if (field.mode() != FieldMode::deterministic)
        throw std::invalid_argument("ito_ventzell_residual: field must be in deterministic mode");
    if (std::abs(path.dt - dt) > 1e-12 * std::max(1.0, dt))
        throw std::invalid_argument("ito_ventzell_residual: dt mismatch between path and argument");
    const std::size_t n_steps = path.db.size();
    if (path.times.size() != n_steps + 1 || path.x.size() != n_steps + 1)
        throw std::invalid_argument("ito_ventzell_residual: inconsistent path lengths");

    // Derivative layers for every field time index, interpolated at (t, X).
    std::vector<DerivativeLayer> layers(field.nt());
    for (std::size_t ti = 0; ti < field.nt(); ++ti) layers[ti] = estimate_derivatives(field, ti);
    const auto& tn = field.grid().t_nodes;
    auto deriv_at = [&](double t, double x, bool second) {
        auto it = std::upper_bound(tn.begin(), tn.end(), t);
        std::size_t j = (it == tn.begin()) ? 0 : static_cast<std::size_t>(it - tn.begin()) - 1;
        if (j > tn.size() - 2) j = tn.size() - 2;
        const double w = std::clamp((t - tn[j]) / (tn[j + 1] - tn[j]), 0.0, 1.0);
        const auto& lo = second ? layers[j].y_double_prime : layers[j].y_prime;
        const auto& hi = second ? layers[j + 1].y_double_prime : layers[j + 1].y_prime;
        const double vlo = interp1_uniform(field.grid().x_nodes, lo, x).value;
        if (w == 0.0) return vlo;
        return (1.0 - w) * vlo + w * interp1_uniform(field.grid().x_nodes, hi, x).value;
    };

    const std::size_t n_atoms = spec.jumps.size();
    const std::vector<double> kzero(n_atoms, 0.0);
    std::vector<double> residuals(n_steps);
    std::size_t mark_cursor = 0;

    for (std::size_t n = 0; n < n_steps; ++n) {
        const double t0 = path.times[n];
        const double t1 = path.times[n + 1];
        const double x0 = path.x[n];
        const double x1 = path.x[n + 1];
        const double u = path.u[n];

        const double y0 = field.eval_y(t0, x0);
        const double y1 = field.eval_y(t1, x1);
        const double time_part = field.eval_y(t1, x0) - y0;

        const double alpha = spec.coefficients.alpha(t0, x0, y0, 0.0, kzero, u);
        const double beta = spec.coefficients.beta(t0, x0, y0, 0.0, kzero, u);
        const double yp = deriv_at(t0, x0, false);
        const double ypp = deriv_at(t0, x0, true);

        double drift = yp * alpha + 0.5 * ypp * beta * beta;
        double compensation = 0.0;
        for (std::size_t a = 0; a < n_atoms; ++a) {
            const JumpAtom& atom = spec.jumps.atoms[a];
            const double gamma = spec.coefficients.gamma(t0, x0, y0, 0.0, kzero, u, atom.zeta);
            const double dy = field.eval_y(t0, x0 + gamma) - y0;
            drift += atom.weight * (dy - yp * gamma);
            compensation += atom.weight * dy;
        }
        double jump_part = -dt * compensation;
        while (mark_cursor < path.marks.size() &&
               path.marks[mark_cursor].step == static_cast<std::int32_t>(n)) {
            const auto a = static_cast<std::size_t>(path.marks[mark_cursor].atom);
            const JumpAtom& atom = spec.jumps.atoms[a];
            const double gamma = spec.coefficients.gamma(t0, x0, y0, 0.0, kzero, u, atom.zeta);
            jump_part += field.eval_y(t0, x0 + gamma) - y0;
            ++mark_cursor;
        }

        residuals[n] = (y1 - y0) - time_part - drift * dt - yp * beta * path.db[n] - jump_part;
    }

    PathResidualStats stats;
    stats.steps = n_steps;
    stats.mean = pairwise_sum(residuals) / static_cast<double>(n_steps);
    std::vector<double> sq(n_steps);
    for (std::size_t n = 0; n < n_steps; ++n) sq[n] = residuals[n] * residuals[n];
    stats.rms = std::sqrt(pairwise_sum(sq) / static_cast<double>(n_steps));
    return stats;
}

}  // namespace fbsde
