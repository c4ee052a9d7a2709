#include "doctest.h"

#include <cmath>
#include <numbers>

#include "generators.hpp"
#include "mfspde/control.hpp"
#include "mfspde/errors.hpp"
#include "mfspde/presets.hpp"
#include "oracles.hpp"

using namespace mfspde;
using mfspde::test::Gen;

namespace {

ForwardConfig config(const CoefficientSet& coeffs, std::size_t n, std::size_t N) {
    ForwardConfig cfg;
    cfg.grid = build_spatial_grid(0.0, 1.0, n);
    cfg.op = assemble_operator_L(cfg.grid, 0.5);
    cfg.time = build_time_grid(1.0, N);
    cfg.levy = default_levy_measure();
    cfg.coeffs = coeffs;
    cfg.initial.resize(n);
    for (std::size_t i = 0; i < n; ++i) cfg.initial[i] = 1.0 + std::sin(std::numbers::pi * cfg.grid.nodes[i]);
    return cfg;
}

}  // namespace

TEST_CASE("hamiltonian value and domain errors") {
    const auto levy = default_levy_measure();
    const auto c = harvesting_coefficients(0.5, 0.2, 1.0, 1.0);
    HamiltonianInputs in{0.1, 0.5, 1.2, 0.9, 0.7, 0.0, 0.3, -0.2, {0.1, 0.4}};
    CHECK(hamiltonian(in, c, levy) ==
          doctest::Approx(mfspde::test::harvesting_H(1.2, 0.9, 0.7, 0.3, -0.2, {0.1, 0.4}, 0.5, 0.2, 1.0,
                                                     levy.marks, levy.intensities)));
    in.u = 0.0;
    CHECK_THROWS_AS(hamiltonian(in, c, levy), DomainError);
    in.u = 1.0;
    in.y = -1.0;
    CHECK_THROWS_AS(hamiltonian(in, c, levy), DomainError);
}

TEST_CASE("performance functional by hand on a deterministic path") {
    // heat model with f = y and g = 2 y: J = sum dt h sum y + h sum 2 y_N
    auto coeffs = heat_coefficients();
    coeffs.running = [](const PointArgs& a) { return Sensitivity{a.y, 1, 0, 0, 0}; };
    coeffs.terminal = [](double, double y, double) { return Sensitivity{2 * y, 2, 0, 0, 0}; };
    const auto cfg = config(coeffs, 5, 10);
    const auto noise = sample_noise(cfg.time, cfg.levy, 2, 1);
    const auto path = solve_forward(cfg, noise, ControlField::constant(10, 5, 0.0, -1, 1));
    double ref = 0.0;
    for (std::size_t t = 0; t < 10; ++t) {
        for (std::size_t i = 0; i < 5; ++i) ref += 0.1 * cfg.grid.h * path.states[t](0, i);
    }
    for (std::size_t i = 0; i < 5; ++i) ref += cfg.grid.h * 2.0 * path.states[10](0, i);
    const auto J = performance(cfg, path);
    CHECK(J.value == doctest::Approx(ref).epsilon(1e-13));
    CHECK(J.std_error == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("paired differences under common noise") {
    JEstimate a, b;
    a.per_scenario = {1.0, 2.0, 3.0, 4.0};
    b.per_scenario = {0.5, 1.5, 2.5, 3.5};
    a.value = 2.5;
    b.value = 2.0;
    const auto d = paired_difference(a, b);
    CHECK(d.diff == doctest::Approx(0.5));
    CHECK(d.std_error == doctest::Approx(0.0).scale(1.0));
    b.per_scenario.pop_back();
    CHECK_THROWS_AS(paired_difference(a, b), InvalidArgument);
}

TEST_CASE("clamp-active classification") {
    CHECK(clamp_active(1.0, -0.5, 1.0, 2.0));
    CHECK_FALSE(clamp_active(1.0, 0.5, 1.0, 2.0));
    CHECK(clamp_active(2.0, 0.5, 1.0, 2.0));
    CHECK_FALSE(clamp_active(1.5, -3.0, 1.0, 2.0));
}

TEST_CASE("residual sup-RMS skips clamp-active samples") {
    std::vector<FieldEnsemble> r(1, FieldEnsemble(2, 2));
    r[0](0, 0) = 3.0;
    r[0](1, 0) = 4.0;   // node 0: rms = sqrt(12.5)
    r[0](0, 1) = -9.0;  // clamp-active at u_min
    r[0](1, 1) = 1.0;
    const auto u = ControlField::adapted(1, 2, 2, {1.5, 1.0, 1.5, 1.5}, 1.0, 2.0);
    double biggest = 0.0;
    std::size_t excluded = 0;
    const double v = residual_sup_rms(r, u, &biggest, &excluded);
    CHECK(v == doctest::Approx(std::sqrt(12.5)));
    CHECK(biggest == 4.0);
    CHECK(excluded == 1);
}

TEST_CASE("conditional projection respects the delay") {
    const auto cfg = config(harvesting_coefficients(0.5, 0.2, 1.0, 1.0), 4, 20);
    const auto noise = sample_noise(cfg.time, cfg.levy, 300, 3);
    const auto path = solve_forward(cfg, noise, ControlField::constant(20, 4, 1.0, 1e-3, 50));
    const auto target = path.states[10].node_samples(2);
    // no delay: the sample is a function of the feature, so it is reproduced
    const auto p0 = project_conditional(target, 10, 2, path, cfg.time, InfoFiltration{0.0}, RegressionSpec{});
    for (std::size_t s = 0; s < 300; ++s) CHECK(p0[s] == doctest::Approx(target[s]).epsilon(1e-6));
    // delay beyond t: trivial information, so the ensemble mean
    const auto p1 = project_conditional(target, 10, 2, path, cfg.time, InfoFiltration{0.6}, RegressionSpec{});
    const double mean = path.states[10].node_mean(2);
    for (double v : p1) CHECK(v == doctest::Approx(mean));
    CHECK_THROWS_AS(project_conditional(target, 10, 2, path, cfg.time, InfoFiltration{-1.0}, RegressionSpec{}),
                    InvalidArgument);
}

TEST_CASE("concavity: the linear-quadratic model passes") {
    const auto levy = default_levy_measure();
    std::vector<AdjointSample> samples{{0.5, 0.2, {0.1, -0.1}}, {-1.0, 0.3, {0.0, 0.2}}};
    const auto v = check_concavity(linear_test_coefficients(), levy, ProbeBox{}, samples, 300, 4);
    CHECK(v.pass);
    CHECK(v.probes > 0);
}

TEST_CASE("concavity: a convex running payoff is caught with a replayable witness") {
    auto coeffs = linear_test_coefficients();
    coeffs.running = [](const PointArgs& a) { return Sensitivity{a.u * a.u, 0, 0, 2 * a.u, 0}; };
    const auto levy = default_levy_measure();
    const auto v = check_concavity(coeffs, levy, ProbeBox{}, {}, 100, 4);
    CHECK_FALSE(v.pass);
    CHECK(v.function == "H");
    CHECK(v.gap > 0.0);
    CHECK(witness_violates(v, coeffs, levy));
}

TEST_CASE("concavity: the harvesting Hamiltonian is not jointly concave") {
    // -y u p is indefinite in (y, u) for p > 0
    const auto levy = default_levy_measure();
    std::vector<AdjointSample> samples{{1.0, 0.0, {0.0, 0.0}}};
    const auto v = check_concavity(harvesting_coefficients(0.5, 0.2, 1.0, 1.0), levy, ProbeBox{}, samples, 200, 5);
    CHECK_FALSE(v.pass);
    CHECK(witness_violates(v, harvesting_coefficients(0.5, 0.2, 1.0, 1.0), levy));
}

TEST_CASE("Gateaux check on the linear-quadratic model with noise") {
    const auto cfg = config(linear_test_coefficients(), 6, 30);
    const auto noise = sample_noise(cfg.time, cfg.levy, 1000, 8);
    Gen gen(101);
    const auto u = ControlField::constant(30, 6, 0.2, -5.0, 5.0);
    const auto beta = ControlField::deterministic(30, 6, gen.vec(180, -1, 1), -1e9, 1e9);
    const double z[] = {1e-2, 5e-3};
    const auto g = gateaux_J(cfg, noise, u, beta, z, InfoFiltration{}, RegressionSpec{});
    CHECK(std::abs(g.fd_derivative - g.pairing_value) <= 0.05 * std::abs(g.fd_derivative));
}

TEST_CASE("Gateaux edge cases") {
    const auto cfg = config(linear_test_coefficients(), 4, 10);
    const auto noise = sample_noise(cfg.time, cfg.levy, 50, 8);
    const auto u = ControlField::constant(10, 4, 0.2, -1.0, 1.0);
    const double z[] = {1e-2};
    const auto zero = ControlField::constant(10, 4, 0.0, -1e9, 1e9);
    const auto g = gateaux_J(cfg, noise, u, zero, z, InfoFiltration{}, RegressionSpec{});
    CHECK(g.fd_derivative == 0.0);
    CHECK(g.pairing_value == 0.0);
    const auto big = ControlField::constant(10, 4, 100.0, -1e9, 1e9);
    CHECK_THROWS_AS(gateaux_J(cfg, noise, u, big, z, InfoFiltration{}, RegressionSpec{}), InvalidArgument);
}

TEST_CASE("projected ascent increases J on the concave model") {
    const auto cfg = config(linear_test_coefficients(), 5, 20);
    const auto noise = sample_noise(cfg.time, cfg.levy, 300, 12);
    const auto res = gradient_ascent(cfg, noise, ControlField::constant(20, 5, 0.0, -2.0, 2.0), 6, 0.5,
                                     InfoFiltration{}, RegressionSpec{});
    REQUIRE(res.J_trace.size() == 7);
    CHECK(res.J_trace.back() > res.J_trace.front());
    CHECK(res.residual_trace.back() < res.residual_trace.front());
    CHECK(res.control.within_bounds());
}

TEST_CASE("necessary-condition residual vanishes at the interior optimum") {
    // For the concave model H_u = -u + p_hat, so the ascent drives the residual down.
    const auto cfg = config(linear_test_coefficients(), 5, 20);
    const auto noise = sample_noise(cfg.time, cfg.levy, 300, 12);
    const auto res = gradient_ascent(cfg, noise, ControlField::constant(20, 5, 0.0, -5.0, 5.0), 30, 0.8,
                                     InfoFiltration{}, RegressionSpec{});
    const auto rep = check_necessary(cfg, noise, res.control, InfoFiltration{}, RegressionSpec{});
    CHECK(rep.sup_residual < 0.05 * res.residual_trace.front());
}
