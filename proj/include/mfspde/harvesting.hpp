#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mfspde/adjoint.hpp"
#include "mfspde/control.hpp"
#include "mfspde/presets.hpp"

namespace mfspde {

struct HarvestingProblem {
    SpatialGrid grid;
    double kappa = 0.5;
    TimeGrid time;
    LevyMeasure levy;
    SpaceTimeFn b;
    SpaceTimeFn sigma;
    JumpScaleFn theta;  // relative jump size at mark e
    SpaceFn alpha;
    SpaceFn y0;
    double u_min = 1e-3;
    double u_max = 50.0;
};

/// Checks y0 > 0, alpha >= 0, theta > -1 at every mark, 0 < u_min <= u_max.
void validate_problem(const HarvestingProblem& problem);

/// Constant-coefficient problem on (0,1): b, sigma, theta(e) = theta_scale e,
/// alpha, and y0(x) = 1 + sin(pi x) unless y0 is given.
HarvestingProblem make_harvesting_problem(const SpatialGrid& grid, const TimeGrid& time,
                                          const LevyMeasure& levy, double b, double sigma,
                                          double theta_scale, double alpha, SpaceFn y0 = {});

ForwardConfig harvesting_forward_config(const HarvestingProblem& problem, std::size_t threads = 1);

struct HarvestingOptions {
    double damping = 0.5;
    double tol_fp = 1e-3;
    std::size_t max_outer = 30;
    RegressionSpec reg{.log_feature = true};
    std::size_t threads = 1;
};

struct HarvestingSolution {
    ForwardPath path;
    AdjointTriple adjoint;
    ControlField control;                 // u*, adapted
    std::vector<double> change_history;   // median |T(u) - u| per outer iteration
    std::vector<double> residual_history; // median |u Y p_hat - 1| on non-clamped points
    std::size_t iterations = 0;
    bool converged = false;
    bool change_eventually_decreasing = false;
    double median_fp_residual = 0.0;
    std::size_t clamped_points = 0;
    JEstimate J;
    RegressionDiagnostics diagnostics;
};

/// Damped fixed point u <- (1 - w) u + w clamp(1 / (Y p_hat)) on one noise
/// path. Stops when both the median control change and the median
/// |u Y p_hat - 1| are at most tol_fp; u* is then the undamped update and the
/// returned path and adjoint are recomputed under it. After max_outer
/// iterations without convergence the iterate with the smallest change is
/// returned.
HarvestingSolution solve_harvesting(const HarvestingProblem& problem, const NoisePath& noise,
                                    const HarvestingOptions& opts);

struct ChallengerResult {
    std::string name;
    double J = 0.0;
    double diff = 0.0;       // J(u*) - J(challenger)
    double std_error = 0.0;  // paired
    bool beats = false;      // J(challenger) - J(u*) > 2 std_error
};

struct OptimalityReport {
    double J_star = 0.0;
    double J_star_std_error = 0.0;
    std::vector<ChallengerResult> challengers;
    std::size_t n_beating = 0;
};

/// Compares u* against itself, the constant u_min, and n_challengers random
/// admissible controls (scalings, constants, noisy copies and bumps of u*),
/// all on the solution's noise path.
OptimalityReport verify_harvest_optimality(const HarvestingProblem& problem,
                                           const HarvestingSolution& sol, const NoisePath& noise,
                                           std::size_t n_challengers, std::uint64_t seed,
                                           std::size_t threads = 1);

}  // namespace mfspde
