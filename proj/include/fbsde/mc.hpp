#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fbsde/driver.hpp"
#include "fbsde/field.hpp"
#include "fbsde/model.hpp"

namespace fbsde {

struct ControlPolicy {
    std::function<double(double t, double x)> u;
    std::string id;

    static ControlPolicy constant(double value);
    // Feedback policy read from a solved control field (nearest time layer,
    // linear in x).
    static ControlPolicy from_control_field(const SpaceTimeGrid& grid,
                                            std::vector<double> control_field, std::string id);
};

// Monte Carlo ensemble of (X, Y, Z, K, u) trajectories with per-path RNG
// provenance. X, dB, U are filled by simulate_forward; Y, Z, K by
// reconstruct_backward.
struct PathBundle {
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
    std::size_t n_atoms = 0;
    double dt = 0.0;
    std::vector<double> times;  // n_steps + 1

    std::vector<double> X;   // [path][n_steps + 1]
    std::vector<double> dB;  // [path][n_steps]
    std::vector<double> U;   // [path][n_steps + 1]
    std::vector<JumpMark> marks;         // CSR payload, sorted by (step, atom) per path
    std::vector<std::size_t> marks_off;  // n_paths + 1 offsets

    std::vector<double> Y, Z;  // [path][n_steps + 1], reconstruct_backward
    std::vector<double> K;     // [path][n_steps + 1][atom]
    bool backward_filled = false;

    std::uint64_t seed = 0;
    std::string control_policy_id;

    std::span<const double> x_path(std::size_t p) const {
        return {X.data() + p * (n_steps + 1), n_steps + 1};
    }
    std::span<const double> db_path(std::size_t p) const {
        return {dB.data() + p * n_steps, n_steps};
    }
    std::span<const double> u_path(std::size_t p) const {
        return {U.data() + p * (n_steps + 1), n_steps + 1};
    }
    std::span<const JumpMark> marks_path(std::size_t p) const {
        return {marks.data() + marks_off[p], marks_off[p + 1] - marks_off[p]};
    }
    ForwardPathView path_view(std::size_t p) const {
        return {times, x_path(p), db_path(p), u_path(p), marks_path(p), dt};
    }
    // Poisson count of atom `a` jumps of path `p` in step `n`.
    int jump_count(std::size_t p, std::size_t n, std::size_t a) const;
};

// Euler-Maruyama with compensated per-atom Poisson jumps. When `field` is
// given, coefficient (y, z, k) arguments are read from it; otherwise they are
// zero. Identical (spec, policy, n_paths, dt, seed) inputs give bit-identical
// bundles regardless of thread count.
PathBundle simulate_forward(const ProblemSpec& spec, const ControlPolicy& policy,
                            std::size_t n_paths, double dt, std::uint64_t seed,
                            const DecouplingField* field = nullptr, bool parallel = true);

// Fills Y, Z, K through the decoupling field lifts.
void reconstruct_backward(const DecouplingField& field, PathBundle& bundle,
                          const ProblemSpec& spec);

struct ResidualStats {
    double rms = 0.0;
    double mean = 0.0;
    double terminal_mismatch_max = 0.0;
    std::size_t samples = 0;
};

// Per-step residual of the backward equation over all paths and steps.
ResidualStats bsde_residual(const ProblemSpec& spec, const PathBundle& bundle);

struct GirsanovEstimate {
    double entropy_hat = 0.0;
    double std_err = 0.0;
    double closed_form = 0.0;  // 1/2 int (b/sigma)^2 dt by trapezoid quadrature
    std::size_t n_paths = 0;
    double density_mean = 0.0;  // sample mean of Gamma(T); 1 in expectation
};

// Relative-entropy estimate E[Gamma ln Gamma] for the exponential martingale
// d Gamma = -Gamma (b/sigma) dB, evolved in log space.
GirsanovEstimate girsanov_entropy(const std::function<double(double)>& b,
                                  const std::function<double(double)>& sigma, double T,
                                  std::size_t n_paths, double dt, std::uint64_t seed,
                                  bool parallel = true);

// One row per path x time: t,X,Y,Z,K_1..K_A (paths in order, time ascending).
void write_bundle_csv(const PathBundle& bundle, std::ostream& os);

}  // namespace fbsde
