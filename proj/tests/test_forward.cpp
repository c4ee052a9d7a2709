#include "doctest.h"

#include <cmath>
#include <numbers>

#include "generators.hpp"
#include "mfspde/errors.hpp"
#include "mfspde/forward.hpp"
#include "mfspde/harvesting.hpp"
#include "mfspde/presets.hpp"
#include "oracles.hpp"

using namespace mfspde;
using mfspde::test::Gen;

namespace {

ForwardConfig small_config(const CoefficientSet& coeffs, std::size_t n, std::size_t N, double T = 1.0) {
    ForwardConfig cfg;
    cfg.grid = build_spatial_grid(0.0, 1.0, n);
    cfg.op = assemble_operator_L(cfg.grid, 0.5);
    cfg.time = build_time_grid(T, N);
    cfg.levy = default_levy_measure();
    cfg.coeffs = coeffs;
    cfg.initial.resize(n);
    for (std::size_t i = 0; i < n; ++i) cfg.initial[i] = 1.0 + std::sin(std::numbers::pi * cfg.grid.nodes[i]);
    return cfg;
}

}  // namespace

TEST_CASE("heat reduction reproduces the discrete eigen-decay exactly") {
    auto cfg = small_config(heat_coefficients(), 49, 200, 0.2);
    for (std::size_t i = 0; i < 49; ++i) cfg.initial[i] = std::sin(std::numbers::pi * cfg.grid.nodes[i]);
    const auto noise = sample_noise(cfg.time, cfg.levy, 3, 1);
    const auto path = solve_forward(cfg, noise, ControlField::constant(200, 49, 0.0, -1.0, 1.0));
    const double amp = mfspde::test::implicit_heat_amplitude(0.5, cfg.grid.h, cfg.time.dt(), 200);
    for (std::size_t s = 0; s < 3; ++s) {
        for (std::size_t i = 0; i < 49; ++i) {
            const double x = cfg.grid.nodes[i];
            CHECK(path.states[200](s, i) == doctest::Approx(amp * std::sin(std::numbers::pi * x)).epsilon(1e-11));
            CHECK(path.states[200](s, i) == doctest::Approx(mfspde::test::heat_exact(0.2, x, 0.5)).epsilon(0.01));
        }
    }
}

TEST_CASE("boundary data enters through the edge rows") {
    auto coeffs = heat_coefficients();
    coeffs.boundary = [](double, double) { return 1.0; };
    auto cfg = small_config(coeffs, 9, 400, 4.0);
    for (auto& v : cfg.initial) v = 0.0;
    const auto noise = sample_noise(cfg.time, cfg.levy, 1, 1);
    const auto path = solve_forward(cfg, noise, ControlField::constant(400, 9, 0.0, -1.0, 1.0));
    // steady state of the heat equation with unit boundary values is 1
    for (std::size_t i = 0; i < 9; ++i) CHECK(path.states.back()(0, i) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("ensemble mean follows the discrete mean recursion") {
    // harvesting form with deterministic u: E[Y] obeys
    //   (I - dt L) m_{t+1} = m_t + dt (b m_t - u m_t)
    const auto cfg = small_config(harvesting_coefficients(0.5, 0.2, 1.0, 1.0), 10, 50);
    const std::size_t M = 4000;
    const auto noise = sample_noise(cfg.time, cfg.levy, M, 77);
    Gen gen(3);
    const auto uvals = gen.vec(50 * 10, 0.5, 1.5);
    const auto u = ControlField::deterministic(50, 10, uvals, 1e-3, 50.0);
    const auto path = solve_forward(cfg, noise, u);
    CHECK(path.floor_hits == 0);

    Eigen::MatrixXd A = -cfg.time.dt() * mfspde::test::dense_laplacian(10, cfg.grid.h, 0.5);
    A.diagonal().array() += 1.0;
    std::vector<double> m = cfg.initial;
    for (std::size_t t = 0; t < 50; ++t) {
        std::vector<double> rhs(10);
        for (std::size_t i = 0; i < 10; ++i) rhs[i] = m[i] + cfg.time.dt() * (0.5 - uvals[t * 10 + i]) * m[i];
        m = mfspde::test::dense_solve(A, rhs);
        for (std::size_t i = 0; i < 10; ++i) {
            const auto col = path.states[t + 1].node_samples(i);
            double mean = 0.0, ss = 0.0;
            for (double v : col) mean += v;
            mean /= M;
            for (double v : col) ss += (v - mean) * (v - mean);
            const double se = std::sqrt(ss / (M - 1) / M);
            CHECK(std::abs(mean - m[i]) <= 4.0 * se + 1e-12);
        }
    }
}

TEST_CASE("results do not depend on the thread count") {
    auto cfg = small_config(harvesting_coefficients(0.5, 0.2, 1.0, 1.0), 8, 30);
    const auto noise = sample_noise(cfg.time, cfg.levy, 200, 5);
    const auto u = ControlField::constant(30, 8, 1.0, 1e-3, 50.0);
    const auto a = solve_forward(cfg, noise, u);
    cfg.threads = 4;
    const auto b = solve_forward(cfg, noise, u);
    for (std::size_t t = 0; t <= 30; ++t) CHECK(a.states[t] == b.states[t]);
}

TEST_CASE("feedback controls are realized on the path") {
    const auto cfg = small_config(harvesting_coefficients(0.5, 0.2, 1.0, 1.0), 6, 20);
    const auto noise = sample_noise(cfg.time, cfg.levy, 50, 8);
    const auto fb = ControlField::feedback(
        20, 6, [](std::size_t, std::size_t, double, double, double y) { return 0.5 * y; }, 0.1, 2.0);
    const auto path = solve_forward(cfg, noise, fb);
    CHECK(path.control.mode() == ControlField::Mode::Adapted);
    for (std::size_t t = 0; t < 20; ++t) {
        for (std::size_t s = 0; s < 50; ++s) {
            for (std::size_t i = 0; i < 6; ++i) {
                CHECK(path.control.value(t, s, i) == std::clamp(0.5 * path.states[t](s, i), 0.1, 2.0));
            }
        }
    }
    // replaying the realized control reproduces the path
    const auto again = solve_forward(cfg, noise, path.control);
    CHECK(again.states.back() == path.states.back());
}

TEST_CASE("invalid inputs") {
    const auto cfg = small_config(heat_coefficients(), 5, 10);
    const auto noise = sample_noise(cfg.time, cfg.levy, 4, 1);
    CHECK_THROWS_AS(solve_forward(cfg, noise, ControlField::constant(9, 5, 0.0, -1, 1)), InvalidArgument);
    CHECK_THROWS_AS(ControlField::constant(10, 5, 0.0, 1.0, -1.0), InvalidArgument);
    auto bad = ControlField::deterministic(10, 5, std::vector<double>(50, 3.0), -1.0, 1.0);
    CHECK_THROWS_AS(solve_forward(cfg, noise, bad), InvalidArgument);
    const auto other = sample_noise(build_time_grid(1.0, 11), cfg.levy, 4, 1);
    CHECK_THROWS_AS(solve_forward(cfg, other, ControlField::constant(10, 5, 0.0, -1, 1)), InvalidArgument);
}

TEST_CASE("positivity violations are reported") {
    // harvest rate 50 with dt = 0.1 drives every cell below the floor
    const auto cfg = small_config(harvesting_coefficients(0.5, 0.2, 1.0, 1.0), 5, 10);
    const auto noise = sample_noise(cfg.time, cfg.levy, 20, 1);
    CHECK_THROWS_AS(solve_forward(cfg, noise, ControlField::constant(10, 5, 50.0, 1e-3, 50.0)), NumericalError);
}

TEST_CASE("property: harvesting states stay positive") {
    mfspde::test::for_all(5, 61, [](Gen& gen, std::size_t) {
        const auto cfg = small_config(harvesting_coefficients(gen.uniform(-0.5, 1.0), gen.uniform(0.0, 0.5), 1.0, 1.0), 6, 40);
        const auto noise = sample_noise(cfg.time, cfg.levy, 100, gen.seed());
        const auto path = solve_forward(cfg, noise, ControlField::constant(40, 6, gen.uniform(0.1, 3.0), 1e-3, 50.0));
        for (const auto& st : path.states) {
            for (double v : st.values()) CHECK(v > 0.0);
        }
    });
}

TEST_CASE("step_forward agrees with the full sweep") {
    const auto cfg = small_config(linear_test_coefficients(), 7, 12);
    const auto noise = sample_noise(cfg.time, cfg.levy, 30, 4);
    const auto u = ControlField::constant(12, 7, 0.3, -1.0, 1.0);
    const auto path = solve_forward(cfg, noise, u);
    const std::vector<double> slice(30 * 7, 0.3);
    const auto next = step_forward(path.states[5], 5, cfg, slice, noise);
    for (std::size_t k = 0; k < next.values().size(); ++k) {
        CHECK(next.values()[k] == doctest::Approx(path.states[6].values()[k]).epsilon(1e-14));
    }
}

TEST_CASE("derivative process matches finite differences") {
    for (const auto& coeffs : {harvesting_coefficients(0.5, 0.2, 1.0, 1.0), linear_test_coefficients()}) {
        auto cfg = small_config(coeffs, 8, 40);
        cfg.F = MeanFieldOperator::square_moment();
        cfg.G = MeanFieldOperator::exp_moment(0.5);
        const std::size_t M = 200;
        const auto noise = sample_noise(cfg.time, cfg.levy, M, 13);
        Gen gen(19);
        const auto u = ControlField::deterministic(40, 8, gen.vec(320, 0.5, 1.5), -5.0, 50.0);
        const auto beta = ControlField::deterministic(40, 8, gen.vec(320, -1.0, 1.0), -1e9, 1e9);
        const auto path = solve_forward(cfg, noise, u);
        const auto D = derivative_process(cfg, noise, path, beta);
        const double z = 1e-5;
        const auto up = solve_forward(cfg, noise, perturb_control(u, beta, z, M));
        const auto um = solve_forward(cfg, noise, perturb_control(u, beta, -z, M));
        double num = 0.0, den = 0.0;
        for (std::size_t t = 0; t <= 40; ++t) {
            for (std::size_t k = 0; k < D[t].values().size(); ++k) {
                const double fd = (up.states[t].values()[k] - um.states[t].values()[k]) / (2 * z);
                num += (fd - D[t].values()[k]) * (fd - D[t].values()[k]);
                den += D[t].values()[k] * D[t].values()[k];
            }
        }
        CHECK(std::sqrt(num / den) < 1e-6);
    }
}

TEST_CASE("forward Picard iterates contract to the direct solve") {
    const auto cfg = small_config(harvesting_coefficients(0.5, 0.2, 1.0, 1.0), 8, 50);
    const auto noise = sample_noise(cfg.time, cfg.levy, 100, 21);
    const auto r = picard_forward(cfg, noise, ControlField::constant(50, 8, 1.0, 1e-3, 50.0), 6);
    REQUIRE(r.distances.size() == 6);
    for (std::size_t k = 1; k < 5; ++k) CHECK(r.distances[k] < r.distances[k - 1]);
    CHECK(r.distances[4] / r.distances[1] < 0.05);
    CHECK(r.distance_to_fixed_point < 1e-6 * r.distances[0]);
    CHECK(r.factorial_slope < -1.0);
}

TEST_CASE("particle system shapes and reproducibility") {
    const auto cfg = small_config(harvesting_coefficients(0.5, 0.2, 1.0, 1.0), 6, 20);
    const auto u = ControlField::constant(20, 6, 1.0, 1e-3, 50.0);
    const auto a = simulate_particle_system(10, cfg, u, 3);
    const auto b = simulate_particle_system(10, cfg, u, 3);
    CHECK(a.box_average.size() == 21);
    CHECK(a.box_average[0].size() == 6);
    CHECK(a.box_average == b.box_average);
    CHECK_THROWS_AS(simulate_particle_system(0, cfg, u, 3), InvalidArgument);
}

TEST_CASE("path distance") {
    const auto g = build_spatial_grid(0.0, 1.0, 3);
    std::vector<FieldEnsemble> a(2, FieldEnsemble(2, 3, 0.0)), b = a;
    b[1](0, 1) = 2.0;  // scenario 0 differs by 4 h at t = 1
    CHECK(path_distance_sup_H(g, a, b) == doctest::Approx(0.25 * 4.0 / 2.0));
}
