#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "fbsde/driver.hpp"
#include "fbsde/field.hpp"
#include "fbsde/model.hpp"

namespace fbsde {

struct SolveDiagnostics {
    std::size_t time_steps = 0;
    double extrapolation_fraction = 0.0;
    std::vector<double> max_abs_driver;  // per backward step
    std::size_t vertex_max_count = 0;
    std::size_t vertex_min_count = 0;
    std::size_t grid_count = 0;
};

struct SolveReport {
    DecouplingField field;
    std::vector<double> control_field;  // [time x space]
    double y0_at_x0 = 0.0;
    SolveDiagnostics diagnostics;
};

struct SolveOptions {
    bool parallel = true;
};

// Backward explicit Euler for the deterministic-coefficient specialization:
// y(T,.) = h, then y(t_n) = y(t_{n+1}) + dt * G_uhat(t_{n+1}) with uhat from
// the pointwise driver optimization on the t_{n+1} layer. Spatial nodes of a
// layer are independent and run under OpenMP.
SolveReport solve(const ProblemSpec& spec, const SpaceTimeGrid& grid,
                  const SolveOptions& options = {});

// Plain single-loop implementation kept as the reference for the parallel
// kernel; must produce bit-identical fields.
SolveReport solve_reference(const ProblemSpec& spec, const SpaceTimeGrid& grid);

struct HypothesisDeclarations {
    bool lipschitz = false;
    bool bounded = false;
    bool square_integrable = false;
};

struct HypothesisReport {
    bool no_jumps = false;                 // machine-checked
    bool alpha_independent_of_z = false;   // machine-checked
    bool lipschitz_declared = false;
    bool bounded_declared = false;
    bool square_integrability_declared = false;
};

HypothesisReport check_comparison_hypotheses(const ProblemSpec& spec,
                                             const HypothesisDeclarations& declared = {});

struct ComparisonReport {
    bool hypothesis_ok = false;  // driver/terminal ordering held on the probe lattice
    double min_gap = 0.0;        // min over grid of y2 - y1
    std::size_t t_index = 0;
    std::size_t x_index = 0;
    double tol = 0.0;            // 10 * max time step
    bool pass = false;           // meaningful only when hypothesis_ok
};

// Solves both problems on the same grid and checks the ordering conclusion
// y1 <= y2. The driver/terminal ordering hypothesis is spot-checked first; a
// violation yields hypothesis_ok = false and no verdict.
ComparisonReport verify_comparison(const ProblemSpec& spec1, const ProblemSpec& spec2,
                                   const SpaceTimeGrid& grid);

struct CrosscheckReport {
    double max_discrepancy = 0.0;
    std::size_t nodes_checked = 0;
};

// Evaluates the two algebraically identical feedback-control formulas (the
// transformed-driver vertex with z' = 0 and the classical value-function
// vertex) on a solved field and reports the max node discrepancy.
CrosscheckReport classical_hjb_crosscheck(const SolveReport& report,
                                          const std::function<double(double)>& b,
                                          const std::function<double(double)>& sigma);

}  // namespace fbsde
