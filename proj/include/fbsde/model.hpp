#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace fbsde {

// View of the jump layer k(t, x, .) sampled at the atoms of the jump measure.
using KView = std::span<const double>;

// Coefficient signatures for the controlled forward-backward system.
using StateCoeff = std::function<double(double t, double x, double y, double z, KView k, double u)>;
using JumpCoeff =
    std::function<double(double t, double x, double y, double z, KView k, double u, double zeta)>;
using TerminalFn = std::function<double(double x)>;

struct CoefficientSet {
    StateCoeff alpha;     // drift
    StateCoeff beta;      // diffusion
    JumpCoeff gamma;      // jump amplitude, evaluated per atom
    StateCoeff g_driver;  // backward driver
    TerminalFn h_terminal;
};

struct JumpAtom {
    double zeta = 0.0;
    double weight = 0.0;
};

// Finite-atom discretization of the Levy measure; all jump integrals become
// exact finite sums. An empty atom list is the no-jump case.
struct JumpMeasure {
    std::vector<JumpAtom> atoms;
    double total_intensity = 0.0;

    static JumpMeasure from_atoms(std::vector<JumpAtom> atoms);
    bool empty() const { return atoms.empty(); }
    std::size_t size() const { return atoms.size(); }
};

struct ControlSet {
    enum class Kind { interval, finite_list };
    Kind kind = Kind::interval;
    double lo = 0.0;
    double hi = 0.0;
    double resolution = 0.0;     // grid-search step when kind == interval
    std::vector<double> values;  // kind == finite_list, ascending

    static ControlSet make_interval(double lo, double hi, double resolution);
    static ControlSet make_finite(std::vector<double> values);
};

// Uniform-in-x tensor grid on [0,T] x [x_min, x_max]. Throws on construction
// if the invariants fail (t_0 = 0, strictly increasing nodes, >= 5 uniformly
// spaced spatial nodes).
struct SpaceTimeGrid {
    std::vector<double> t_nodes;
    std::vector<double> x_nodes;
    double dx = 0.0;

    static SpaceTimeGrid make(std::vector<double> t_nodes, std::vector<double> x_nodes);
    static SpaceTimeGrid uniform(double T, std::size_t time_steps, double x_min, double x_max,
                                 std::size_t space_nodes);

    std::size_t nt() const { return t_nodes.size(); }
    std::size_t nx() const { return x_nodes.size(); }
    double horizon() const { return t_nodes.back(); }
};

enum class Sense { maximize, minimize };

struct ProblemSpec {
    CoefficientSet coefficients;
    JumpMeasure jumps;
    ControlSet controls;
    double horizon = 1.0;
    double x0 = 0.0;
    Sense sense = Sense::maximize;
    bool deterministic_coefficients = true;
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
    bool contains(const std::string& needle) const;
};

// Collects every violated invariant; never throws. Coefficients are probed on
// a deterministic lattice around x0 and non-finite outputs recorded.
ValidationReport validate_problem(const ProblemSpec& spec);

// Exact finite sum  sum_i weight_i * integrand(zeta_i).
// Throws if the integrand is non-finite at an atom.
double levy_integral(const JumpMeasure& measure, const std::function<double(double)>& integrand);

}  // namespace fbsde
