#include "fbsde/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "fbsde/numeric.hpp"

namespace fbsde {

DecouplingField::DecouplingField(SpaceTimeGrid grid, std::size_t n_atoms, FieldMode mode)
    : grid_(std::move(grid)),
      n_atoms_(n_atoms),
      mode_(mode),
      y_(grid_.nt() * grid_.nx(), 0.0),
      z_(grid_.nt() * grid_.nx(), 0.0),
      k_(grid_.nt() * grid_.nx() * n_atoms, 0.0) {}

DecouplingField DecouplingField::from_function(
    SpaceTimeGrid grid, const std::function<double(double, double)>& y_fn) {
    DecouplingField f(std::move(grid), 0, FieldMode::deterministic);
    for (std::size_t ti = 0; ti < f.nt(); ++ti)
        for (std::size_t xi = 0; xi < f.nx(); ++xi)
            f.y_at(ti, xi) = y_fn(f.grid_.t_nodes[ti], f.grid_.x_nodes[xi]);
    return f;
}

double& DecouplingField::z_at(std::size_t ti, std::size_t xi) {
    if (mode_ == FieldMode::deterministic)
        throw std::logic_error("DecouplingField: z layer is fixed to zero in deterministic mode");
    return z_[ti * nx() + xi];
}

double& DecouplingField::k_at(std::size_t ti, std::size_t xi, std::size_t atom) {
    if (mode_ == FieldMode::deterministic)
        throw std::logic_error("DecouplingField: k layer is fixed to zero in deterministic mode");
    return k_[(ti * nx() + xi) * n_atoms_ + atom];
}

DecouplingField::TimeBracket DecouplingField::bracket_time(double t) const {
    const auto& tn = grid_.t_nodes;
    const double T = tn.back();
    const double tol = 1e-12 * std::max(1.0, T);
    if (t < -tol || t > T + tol)
        throw std::invalid_argument("DecouplingField::eval: t outside [0, T]");
    t = std::clamp(t, 0.0, T);
    auto it = std::upper_bound(tn.begin(), tn.end(), t);
    std::size_t j = (it == tn.begin()) ? 0 : static_cast<std::size_t>(it - tn.begin()) - 1;
    if (j > tn.size() - 2) j = tn.size() - 2;
    const double w = (t - tn[j]) / (tn[j + 1] - tn[j]);
    return {j, w};
}

double DecouplingField::eval_y(double t, double x, bool* extrapolated) const {
    const TimeBracket tb = bracket_time(t);
    const auto lo = interp1_uniform(grid_.x_nodes, y_row(tb.j), x);
    if (tb.w == 0.0) {
        if (extrapolated) *extrapolated = lo.extrapolated;
        return lo.value;
    }
    const auto hi = interp1_uniform(grid_.x_nodes, y_row(tb.j + 1), x);
    if (extrapolated) *extrapolated = lo.extrapolated || hi.extrapolated;
    return (1.0 - tb.w) * lo.value + tb.w * hi.value;
}

double DecouplingField::eval_k(double t, double x, std::size_t atom) const {
    if (atom >= n_atoms_) throw std::out_of_range("DecouplingField::eval_k: atom index");
    if (mode_ == FieldMode::deterministic) {
        bracket_time(t);  // still validates t
        return 0.0;
    }
    const TimeBracket tb = bracket_time(t);
    // Strided view over one atom's layer.
    auto sample_layer = [&](std::size_t ti) {
        std::vector<double> col(nx());
        for (std::size_t xi = 0; xi < nx(); ++xi) col[xi] = k_at(ti, xi, atom);
        return interp1_uniform(grid_.x_nodes, col, x).value;
    };
    const double lo = sample_layer(tb.j);
    if (tb.w == 0.0) return lo;
    return (1.0 - tb.w) * lo + tb.w * sample_layer(tb.j + 1);
}

DecouplingField::Eval DecouplingField::eval(double t, double x) const {
    const TimeBracket tb = bracket_time(t);
    Eval out;
    const auto ylo = interp1_uniform(grid_.x_nodes, y_row(tb.j), x);
    const auto zlo = interp1_uniform(grid_.x_nodes, z_row(tb.j), x);
    if (tb.w == 0.0) {
        out.y = ylo.value;
        out.z = zlo.value;
        out.extrapolated = ylo.extrapolated;
    } else {
        const auto yhi = interp1_uniform(grid_.x_nodes, y_row(tb.j + 1), x);
        const auto zhi = interp1_uniform(grid_.x_nodes, z_row(tb.j + 1), x);
        out.y = (1.0 - tb.w) * ylo.value + tb.w * yhi.value;
        out.z = (1.0 - tb.w) * zlo.value + tb.w * zhi.value;
        out.extrapolated = ylo.extrapolated || yhi.extrapolated;
    }
    out.k.resize(n_atoms_);
    for (std::size_t a = 0; a < n_atoms_; ++a) out.k[a] = eval_k(t, x, a);
    return out;
}

bool DecouplingField::all_finite() const {
    for (double v : y_)
        if (!std::isfinite(v)) return false;
    for (double v : z_)
        if (!std::isfinite(v)) return false;
    for (double v : k_)
        if (!std::isfinite(v)) return false;
    return true;
}

namespace {

void differentiate(std::span<const double> v, double dx, std::vector<double>& first,
                   std::vector<double>& second) {
    const std::size_t n = v.size();
    first.resize(n);
    second.resize(n);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        first[i] = (v[i + 1] - v[i - 1]) / (2.0 * dx);
        second[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (dx * dx);
    }
    first[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx);
    first[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dx);
    second[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (dx * dx);
    second[n - 1] = (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / (dx * dx);
}

}  // namespace

DerivativeLayer estimate_derivatives(const DecouplingField& field, std::size_t time_index) {
    if (time_index >= field.nt())
        throw std::out_of_range("estimate_derivatives: time index out of range");
    if (field.nx() < 5)
        throw std::invalid_argument("estimate_derivatives: need at least 5 spatial nodes");
    DerivativeLayer layer;
    const double dx = field.grid().dx;
    std::vector<double> zsecond;
    differentiate(field.y_row(time_index), dx, layer.y_prime, layer.y_double_prime);
    differentiate(field.z_row(time_index), dx, layer.z_prime, zsecond);
    return layer;
}

double lift_K(const DecouplingField& field, double t, double x, double gamma_at_atom,
              std::size_t atom_index) {
    const double y_shift = field.eval_y(t, x + gamma_at_atom);
    const double y_here = field.eval_y(t, x);
    // Fields without stored atom layers carry k identically zero.
    const double k_shift =
        field.n_atoms() == 0 ? 0.0 : field.eval_k(t, x + gamma_at_atom, atom_index);
    return y_shift - y_here + k_shift;
}

void write_field_csv(const DecouplingField& field, const std::vector<double>* control_field,
                     std::ostream& os) {
    os << "t,x,y,z";
    for (std::size_t a = 0; a < field.n_atoms(); ++a) os << ",k_" << (a + 1);
    os << ",u_hat\n";
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << buf;
    };
    for (std::size_t ti = 0; ti < field.nt(); ++ti)
        for (std::size_t xi = 0; xi < field.nx(); ++xi) {
            put(field.grid().t_nodes[ti]);
            os << ',';
            put(field.grid().x_nodes[xi]);
            os << ',';
            put(field.y_at(ti, xi));
            os << ',';
            put(field.z_at(ti, xi));
            for (std::size_t a = 0; a < field.n_atoms(); ++a) {
                os << ',';
                put(field.k_at(ti, xi, a));
            }
            os << ',';
            put(control_field ? (*control_field)[ti * field.nx() + xi] : 0.0);
            os << '\n';
        }
}

}  // namespace fbsde
