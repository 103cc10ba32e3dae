#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "fbsde/model.hpp"

namespace fbsde {

enum class FieldMode { deterministic, stochastic_readonly };

// Grid-sampled decoupling field y(t,x) with martingale layers z and k. In
// deterministic mode z and k are identically zero and stay that way.
class DecouplingField {
public:
    DecouplingField(SpaceTimeGrid grid, std::size_t n_atoms, FieldMode mode);

    static DecouplingField from_function(SpaceTimeGrid grid,
                                         const std::function<double(double t, double x)>& y_fn);

    const SpaceTimeGrid& grid() const { return grid_; }
    std::size_t n_atoms() const { return n_atoms_; }
    FieldMode mode() const { return mode_; }

    double& y_at(std::size_t ti, std::size_t xi) { return y_[ti * nx() + xi]; }
    double y_at(std::size_t ti, std::size_t xi) const { return y_[ti * nx() + xi]; }
    double& z_at(std::size_t ti, std::size_t xi);
    double z_at(std::size_t ti, std::size_t xi) const { return z_[ti * nx() + xi]; }
    double& k_at(std::size_t ti, std::size_t xi, std::size_t atom);
    double k_at(std::size_t ti, std::size_t xi, std::size_t atom) const {
        return k_[(ti * nx() + xi) * n_atoms_ + atom];
    }

    std::span<const double> y_row(std::size_t ti) const { return {y_.data() + ti * nx(), nx()}; }
    std::span<const double> z_row(std::size_t ti) const { return {z_.data() + ti * nx(), nx()}; }
    std::span<const double> k_row(std::size_t ti) const {
        return {k_.data() + ti * nx() * n_atoms_, nx() * n_atoms_};
    }

    struct Eval {
        double y = 0.0;
        double z = 0.0;
        std::vector<double> k;
        bool extrapolated = false;
    };

    // Bilinear interpolation inside the grid box, linear extrapolation in x
    // outside. Throws if t is outside [0, T].
    Eval eval(double t, double x) const;
    double eval_y(double t, double x, bool* extrapolated = nullptr) const;
    double eval_k(double t, double x, std::size_t atom) const;

    bool all_finite() const;

    std::size_t nt() const { return grid_.nt(); }
    std::size_t nx() const { return grid_.nx(); }

private:
    struct TimeBracket {
        std::size_t j;
        double w;
    };
    TimeBracket bracket_time(double t) const;

    SpaceTimeGrid grid_;
    std::size_t n_atoms_;
    FieldMode mode_;
    std::vector<double> y_, z_, k_;
};

// Spatial derivative estimates at one time index. Central differences at
// interior nodes, one-sided second-order stencils at the two boundary nodes.
struct DerivativeLayer {
    std::vector<double> y_prime;
    std::vector<double> y_double_prime;
    std::vector<double> z_prime;
};

DerivativeLayer estimate_derivatives(const DecouplingField& field, std::size_t time_index);

// Eq-level lifting maps from field data to BSDE data.
inline double lift_Z(double z, double y_prime, double beta) { return z + y_prime * beta; }

double lift_K(const DecouplingField& field, double t, double x, double gamma_at_atom,
              std::size_t atom_index);

// CSV dump: header t,x,y,z,k_1..k_A,u_hat; one row per (t,x); full double
// precision. `control_field` may be null (u_hat column written as 0).
void write_field_csv(const DecouplingField& field, const std::vector<double>* control_field,
                     std::ostream& os);

}  // namespace fbsde
