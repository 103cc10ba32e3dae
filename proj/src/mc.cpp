#include "fbsde/mc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <ostream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fbsde/numeric.hpp"
#include "fbsde/rng.hpp"

namespace fbsde {

ControlPolicy ControlPolicy::constant(double value) {
    return {[value](double, double) { return value; }, "const:" + std::to_string(value)};
}

ControlPolicy ControlPolicy::from_control_field(const SpaceTimeGrid& grid,
                                                std::vector<double> control_field,
                                                std::string id) {
    auto t_nodes = grid.t_nodes;
    auto x_nodes = grid.x_nodes;
    const std::size_t nx = x_nodes.size();
    auto fn = [t_nodes, x_nodes, nx, cf = std::move(control_field)](double t, double x) {
        // Nearest time layer; controls are piecewise constant in t.
        auto it = std::lower_bound(t_nodes.begin(), t_nodes.end(), t);
        std::size_t ti = it == t_nodes.end() ? t_nodes.size() - 1
                                             : static_cast<std::size_t>(it - t_nodes.begin());
        if (ti > 0 && (ti == t_nodes.size() || t_nodes[ti] - t > t - t_nodes[ti - 1])) --ti;
        const std::span<const double> row{cf.data() + ti * nx, nx};
        return interp1_uniform(x_nodes, row, x).value;
    };
    return {std::move(fn), std::move(id)};
}

int PathBundle::jump_count(std::size_t p, std::size_t n, std::size_t a) const {
    int count = 0;
    for (const JumpMark& m : marks_path(p))
        if (m.step == static_cast<std::int32_t>(n) && m.atom == static_cast<std::int32_t>(a))
            ++count;
    return count;
}

PathBundle simulate_forward(const ProblemSpec& spec, const ControlPolicy& policy,
                            std::size_t n_paths, double dt, std::uint64_t seed,
                            const DecouplingField* field, bool parallel) {
    if (n_paths < 1) throw std::invalid_argument("simulate_forward: n_paths must be >= 1");
    if (!(dt > 0.0)) throw std::invalid_argument("simulate_forward: dt must be positive");
    const double T = spec.horizon;
    const auto n_steps = static_cast<std::size_t>(std::llround(T / dt));
    if (n_steps < 1 || std::abs(static_cast<double>(n_steps) * dt - T) > 1e-9)
        throw std::invalid_argument("simulate_forward: dt does not divide the horizon");
    if (!policy.u) throw std::invalid_argument("simulate_forward: empty policy");

    PathBundle bundle;
    bundle.n_paths = n_paths;
    bundle.n_steps = n_steps;
    bundle.n_atoms = spec.jumps.size();
    bundle.dt = dt;
    bundle.seed = seed;
    bundle.control_policy_id = policy.id;
    bundle.times.resize(n_steps + 1);
    for (std::size_t i = 0; i <= n_steps; ++i) bundle.times[i] = static_cast<double>(i) * dt;
    bundle.times.back() = T;
    bundle.X.resize(n_paths * (n_steps + 1));
    bundle.dB.resize(n_paths * n_steps);
    bundle.U.resize(n_paths * (n_steps + 1));

    const std::size_t n_atoms = spec.jumps.size();
    std::vector<std::vector<JumpMark>> path_marks(n_paths);
    std::exception_ptr error;

#ifdef _OPENMP
#pragma omp parallel for if (parallel) schedule(static)
#endif
    for (long pl = 0; pl < static_cast<long>(n_paths); ++pl) {
        try {
            const auto p = static_cast<std::size_t>(pl);
            PathRng rng(seed, p);
            double* xs = bundle.X.data() + p * (n_steps + 1);
            double* dbs = bundle.dB.data() + p * n_steps;
            double* us = bundle.U.data() + p * (n_steps + 1);
            std::vector<double> kbuf(n_atoms, 0.0);
            const double sqdt = std::sqrt(dt);

            xs[0] = spec.x0;
            for (std::size_t i = 0; i < n_steps; ++i) {
                const double t = bundle.times[i];
                const double x = xs[i];
                double y = 0.0, z = 0.0;
                if (field) {
                    y = field->eval_y(t, x);
                    for (std::size_t a = 0; a < n_atoms; ++a) kbuf[a] = field->eval_k(t, x, a);
                }
                const double u = policy.u(t, x);
                if (!std::isfinite(u))
                    throw std::runtime_error("simulate_forward: policy undefined at t=" +
                                             std::to_string(t) + ", x=" + std::to_string(x));
                us[i] = u;
                const double alpha = spec.coefficients.alpha(t, x, y, z, kbuf, u);
                const double beta = spec.coefficients.beta(t, x, y, z, kbuf, u);
                const double db = sqdt * rng.next_normal();
                dbs[i] = db;

                double jump_sum = 0.0;
                double compensator = 0.0;
                for (std::size_t a = 0; a < n_atoms; ++a) {
                    const JumpAtom& atom = spec.jumps.atoms[a];
                    const double gamma =
                        spec.coefficients.gamma(t, x, y, z, kbuf, u, atom.zeta);
                    const int count = rng.next_poisson(atom.weight * dt);
                    jump_sum += static_cast<double>(count) * gamma;
                    compensator += atom.weight * gamma;
                    for (int c = 0; c < count; ++c)
                        path_marks[p].push_back({static_cast<std::int32_t>(i),
                                                 static_cast<std::int32_t>(a)});
                }
                xs[i + 1] = x + alpha * dt + beta * db + jump_sum - dt * compensator;
                if (!std::isfinite(xs[i + 1]))
                    throw std::runtime_error("simulate_forward: non-finite state on path " +
                                             std::to_string(p) + " at step " + std::to_string(i));
            }
            us[n_steps] = policy.u(bundle.times[n_steps], xs[n_steps]);
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);

    // Flatten jump marks serially so the CSR layout is schedule-independent.
    bundle.marks_off.resize(n_paths + 1, 0);
    for (std::size_t p = 0; p < n_paths; ++p)
        bundle.marks_off[p + 1] = bundle.marks_off[p] + path_marks[p].size();
    bundle.marks.resize(bundle.marks_off.back());
    for (std::size_t p = 0; p < n_paths; ++p)
        std::copy(path_marks[p].begin(), path_marks[p].end(),
                  bundle.marks.begin() + static_cast<long>(bundle.marks_off[p]));
    return bundle;
}

void reconstruct_backward(const DecouplingField& field, PathBundle& bundle,
                          const ProblemSpec& spec) {
    if (field.mode() != FieldMode::deterministic)
        throw std::invalid_argument("reconstruct_backward: field must be in deterministic mode");
    const std::size_t n_atoms = spec.jumps.size();
    const std::size_t len = bundle.n_steps + 1;
    bundle.Y.assign(bundle.n_paths * len, 0.0);
    bundle.Z.assign(bundle.n_paths * len, 0.0);
    bundle.K.assign(bundle.n_paths * len * n_atoms, 0.0);

    std::vector<DerivativeLayer> layers(field.nt());
    for (std::size_t ti = 0; ti < field.nt(); ++ti) layers[ti] = estimate_derivatives(field, ti);
    const auto& tn = field.grid().t_nodes;
    auto y_prime_at = [&](double t, double x) {
        auto it = std::upper_bound(tn.begin(), tn.end(), t);
        std::size_t j = (it == tn.begin()) ? 0 : static_cast<std::size_t>(it - tn.begin()) - 1;
        if (j > tn.size() - 2) j = tn.size() - 2;
        const double w = std::clamp((t - tn[j]) / (tn[j + 1] - tn[j]), 0.0, 1.0);
        const double lo = interp1_uniform(field.grid().x_nodes, layers[j].y_prime, x).value;
        if (w == 0.0) return lo;
        return (1.0 - w) * lo +
               w * interp1_uniform(field.grid().x_nodes, layers[j + 1].y_prime, x).value;
    };

    std::exception_ptr error;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long pl = 0; pl < static_cast<long>(bundle.n_paths); ++pl) {
        try {
            const auto p = static_cast<std::size_t>(pl);
            std::vector<double> kbuf(n_atoms, 0.0);
            for (std::size_t i = 0; i < len; ++i) {
                const double t = bundle.times[i];
                const double x = bundle.X[p * len + i];
                const double u = bundle.U[p * len + i];
                const DecouplingField::Eval e = field.eval(t, x);
                for (std::size_t a = 0; a < n_atoms; ++a) kbuf[a] = e.k[a];
                const double beta = spec.coefficients.beta(t, x, e.y, e.z, kbuf, u);
                bundle.Y[p * len + i] = e.y;
                bundle.Z[p * len + i] = lift_Z(e.z, y_prime_at(t, x), beta);
                for (std::size_t a = 0; a < n_atoms; ++a) {
                    const double gamma = spec.coefficients.gamma(t, x, e.y, e.z, kbuf, u,
                                                                 spec.jumps.atoms[a].zeta);
                    bundle.K[(p * len + i) * n_atoms + a] = lift_K(field, t, x, gamma, a);
                }
            }
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    bundle.backward_filled = true;
}

ResidualStats bsde_residual(const ProblemSpec& spec, const PathBundle& bundle) {
    if (!bundle.backward_filled)
        throw std::invalid_argument("bsde_residual: bundle has no Y/Z/K layers");
    const std::size_t n_atoms = spec.jumps.size();
    const std::size_t len = bundle.n_steps + 1;
    const double dt = bundle.dt;

    std::vector<double> sums(bundle.n_paths, 0.0), sqsums(bundle.n_paths, 0.0);
    double terminal_max = 0.0;
    std::vector<double> kbuf(n_atoms, 0.0);
    std::vector<int> counts(n_atoms, 0);

    for (std::size_t p = 0; p < bundle.n_paths; ++p) {
        const auto marks = bundle.marks_path(p);
        std::size_t cursor = 0;
        for (std::size_t i = 0; i < bundle.n_steps; ++i) {
            const double t = bundle.times[i];
            const double x = bundle.X[p * len + i];
            const double y = bundle.Y[p * len + i];
            const double z = bundle.Z[p * len + i];
            const double u = bundle.U[p * len + i];
            for (std::size_t a = 0; a < n_atoms; ++a) {
                kbuf[a] = bundle.K[(p * len + i) * n_atoms + a];
                counts[a] = 0;
            }
            while (cursor < marks.size() && marks[cursor].step == static_cast<std::int32_t>(i)) {
                ++counts[static_cast<std::size_t>(marks[cursor].atom)];
                ++cursor;
            }
            const double g = spec.coefficients.g_driver(t, x, y, z, kbuf, u);
            double jump_term = 0.0;
            for (std::size_t a = 0; a < n_atoms; ++a)
                jump_term += kbuf[a] * (static_cast<double>(counts[a]) -
                                        spec.jumps.atoms[a].weight * dt);
            const double r = bundle.Y[p * len + i + 1] - y + g * dt -
                             z * bundle.dB[p * bundle.n_steps + i] - jump_term;
            sums[p] += r;
            sqsums[p] += r * r;
        }
        const double mismatch = std::abs(
            bundle.Y[p * len + bundle.n_steps] -
            spec.coefficients.h_terminal(bundle.X[p * len + bundle.n_steps]));
        terminal_max = std::max(terminal_max, mismatch);
    }

    ResidualStats stats;
    stats.samples = bundle.n_paths * bundle.n_steps;
    stats.mean = pairwise_sum(sums) / static_cast<double>(stats.samples);
    stats.rms = std::sqrt(pairwise_sum(sqsums) / static_cast<double>(stats.samples));
    stats.terminal_mismatch_max = terminal_max;
    return stats;
}

GirsanovEstimate girsanov_entropy(const std::function<double(double)>& b,
                                  const std::function<double(double)>& sigma, double T,
                                  std::size_t n_paths, double dt, std::uint64_t seed,
                                  bool parallel) {
    const auto n_steps = static_cast<std::size_t>(std::llround(T / dt));
    if (n_steps < 1 || std::abs(static_cast<double>(n_steps) * dt - T) > 1e-9)
        throw std::invalid_argument("girsanov_entropy: dt does not divide the horizon");
    // sigma must stay away from zero on the quadrature lattice.
    const std::size_t lattice = 20000;
    for (std::size_t i = 0; i <= lattice; ++i) {
        const double t = T * static_cast<double>(i) / static_cast<double>(lattice);
        if (!(std::abs(sigma(t)) > 1e-8))
            throw std::invalid_argument("girsanov_entropy: sigma vanishes at t=" +
                                        std::to_string(t));
    }

    GirsanovEstimate out;
    out.n_paths = n_paths;
    out.closed_form = trapezoid(
        [&](double t) {
            const double theta = b(t) / sigma(t);
            return 0.5 * theta * theta;
        },
        0.0, T, lattice);

    std::vector<double> theta(n_steps);
    for (std::size_t i = 0; i < n_steps; ++i) {
        const double t = static_cast<double>(i) * dt;
        theta[i] = b(t) / sigma(t);
    }

    std::vector<double> glg(n_paths), gamma_T(n_paths);
    const double sqdt = std::sqrt(dt);
#ifdef _OPENMP
#pragma omp parallel for if (parallel) schedule(static)
#endif
    for (long pl = 0; pl < static_cast<long>(n_paths); ++pl) {
        const auto p = static_cast<std::size_t>(pl);
        PathRng rng(seed, p);
        double log_gamma = 0.0;
        for (std::size_t i = 0; i < n_steps; ++i)
            log_gamma += -theta[i] * sqdt * rng.next_normal() - 0.5 * theta[i] * theta[i] * dt;
        const double g = std::exp(log_gamma);
        gamma_T[p] = g;
        glg[p] = g * log_gamma;
    }

    const MeanStderr ms = mean_stderr(glg);
    out.entropy_hat = ms.mean;
    out.std_err = ms.std_err;
    out.density_mean = pairwise_sum(gamma_T) / static_cast<double>(n_paths);
    return out;
}

void write_bundle_csv(const PathBundle& bundle, std::ostream& os) {
    os << "t,X,Y,Z";
    for (std::size_t a = 0; a < bundle.n_atoms; ++a) os << ",K_" << (a + 1);
    os << '\n';
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << buf;
    };
    const std::size_t len = bundle.n_steps + 1;
    for (std::size_t p = 0; p < bundle.n_paths; ++p)
        for (std::size_t i = 0; i < len; ++i) {
            put(bundle.times[i]);
            os << ',';
            put(bundle.X[p * len + i]);
            os << ',';
            put(bundle.backward_filled ? bundle.Y[p * len + i] : 0.0);
            os << ',';
            put(bundle.backward_filled ? bundle.Z[p * len + i] : 0.0);
            for (std::size_t a = 0; a < bundle.n_atoms; ++a) {
                os << ',';
                put(bundle.backward_filled ? bundle.K[(p * len + i) * bundle.n_atoms + a] : 0.0);
            }
            os << '\n';
        }
}

}  // namespace fbsde
