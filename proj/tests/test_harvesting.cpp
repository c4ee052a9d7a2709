#include "doctest.h"

#include <cmath>

#include "mfspde/errors.hpp"
#include "mfspde/harvesting.hpp"

using namespace mfspde;

namespace {

HarvestingProblem small_problem() {
    return make_harvesting_problem(build_spatial_grid(0.0, 1.0, 6), build_time_grid(1.0, 100),
                                   default_levy_measure(), 0.5, 0.2, 1.0, 1.0);
}

}  // namespace

TEST_CASE("problem validation") {
    auto pr = small_problem();
    CHECK_NOTHROW(validate_problem(pr));
    auto bad = pr;
    bad.y0 = [](double) { return 0.0; };
    CHECK_THROWS_AS(validate_problem(bad), InvalidArgument);
    bad = pr;
    bad.theta = [](double, double, double e) { return 5.0 * e; };  // -1.5 at the mark -0.3
    CHECK_THROWS_AS(validate_problem(bad), InvalidArgument);
    bad = pr;
    bad.u_min = 0.0;
    CHECK_THROWS_AS(validate_problem(bad), InvalidArgument);
    bad = pr;
    bad.alpha = [](double) { return -1.0; };
    CHECK_THROWS_AS(validate_problem(bad), InvalidArgument);
}

TEST_CASE("default initial density is 1 + sin") {
    const auto pr = small_problem();
    CHECK(pr.y0(0.5) == doctest::Approx(2.0));
    CHECK(pr.y0(0.0) == doctest::Approx(1.0));
}

TEST_CASE("fixed point converges on a small problem") {
    const auto pr = small_problem();
    const auto noise = sample_noise(pr.time, pr.levy, 400, 3);
    const auto sol = solve_harvesting(pr, noise, HarvestingOptions{});
    CHECK(sol.converged);
    CHECK(sol.iterations <= 30);
    CHECK(sol.median_fp_residual <= 1e-3);
    CHECK(sol.control.within_bounds());
    CHECK(sol.change_history.size() == sol.iterations);
    CHECK(std::isfinite(sol.J.value));

    // at non-clamped points the first-order condition u Y p_hat = 1 holds closely
    std::size_t good = 0, total = 0;
    for (std::size_t t = 0; t < 100; ++t) {
        for (std::size_t s = 0; s < 400; ++s) {
            for (std::size_t i = 0; i < 6; ++i) {
                const double u = sol.control.value(t, s, i);
                if (u <= pr.u_min || u >= pr.u_max) continue;
                ++total;
                if (std::abs(u * sol.path.states[t](s, i) * sol.adjoint.p_hat[t](s, i) - 1.0) < 1e-2) ++good;
            }
        }
    }
    CHECK(good >= 0.9 * total);

    const auto rep = verify_harvest_optimality(pr, sol, noise, 8, 7);
    CHECK(rep.challengers.size() == 10);
    CHECK(rep.challengers[0].diff == 0.0);
    CHECK(rep.n_beating == 0);
}

TEST_CASE("unreachable tolerance reports non-convergence") {
    const auto pr = small_problem();
    const auto noise = sample_noise(pr.time, pr.levy, 100, 3);
    HarvestingOptions opts;
    opts.tol_fp = 0.0;
    opts.max_outer = 4;
    const auto sol = solve_harvesting(pr, noise, opts);
    CHECK_FALSE(sol.converged);
    CHECK(sol.iterations == 4);
    CHECK(sol.change_history.size() == 4);
}

TEST_CASE("option validation") {
    const auto pr = small_problem();
    const auto noise = sample_noise(pr.time, pr.levy, 10, 3);
    HarvestingOptions opts;
    opts.damping = 0.0;
    CHECK_THROWS_AS(solve_harvesting(pr, noise, opts), InvalidArgument);
    opts = HarvestingOptions{};
    opts.max_outer = 0;
    CHECK_THROWS_AS(solve_harvesting(pr, noise, opts), InvalidArgument);
}
