#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "generators.hpp"
#include "mfspde/errors.hpp"
#include "mfspde/noise.hpp"

using namespace mfspde;

TEST_CASE("levy measure validation") {
    CHECK_THROWS_AS(make_levy_measure({0.1}, {1.0, 2.0}), InvalidArgument);
    CHECK_THROWS_AS(make_levy_measure({0.0}, {1.0}), InvalidArgument);
    CHECK_THROWS_AS(make_levy_measure({0.1}, {0.0}), InvalidArgument);
    const auto m = default_levy_measure();
    CHECK(m.total_intensity() == 2.0);
    CHECK(m.second_moment() == doctest::Approx(0.09 + 0.25));
}

TEST_CASE("sampling is deterministic and independent of the thread count") {
    const auto tg = build_time_grid(1.0, 50);
    const auto levy = default_levy_measure();
    const auto a = sample_noise(tg, levy, 300, 99, 1);
    const auto b = sample_noise(tg, levy, 300, 99, 4);
    const auto c = sample_noise(tg, levy, 300, 100, 1);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    // a scenario's stream does not depend on how many scenarios are drawn
    const auto d = sample_noise(tg, levy, 10, 99, 1);
    for (std::size_t t = 0; t < 50; ++t) CHECK(d.brownian(7, t) == a.brownian(7, t));
}

TEST_CASE("zero scenarios is an error") {
    CHECK_THROWS_AS(sample_noise(build_time_grid(1.0, 5), default_levy_measure(), 0, 1), InvalidArgument);
}

TEST_CASE("increment moments") {
    const auto tg = build_time_grid(1.0, 20);
    const auto levy = make_levy_measure({-0.3, 0.5}, {1.0, 3.0});
    const std::size_t M = 20000;
    const auto np = sample_noise(tg, levy, M, 2024);
    const double dt = tg.dt();
    double sw = 0.0, sww = 0.0;
    std::vector<double> sc(2, 0.0);
    for (std::size_t s = 0; s < M; ++s) {
        for (std::size_t t = 0; t < 20; ++t) {
            sw += np.brownian(s, t);
            sww += np.brownian(s, t) * np.brownian(s, t);
            for (std::size_t k = 0; k < 2; ++k) sc[k] += np.counts(s, t)[k];
        }
    }
    const double n = static_cast<double>(M * 20);
    CHECK(std::abs(sw / n) < 4.0 * std::sqrt(dt / n));
    CHECK(sww / n == doctest::Approx(dt).epsilon(0.02));
    for (std::size_t k = 0; k < 2; ++k) {
        const double lam = levy.intensities[k] * dt;
        CHECK(std::abs(sc[k] / n - lam) < 4.0 * std::sqrt(lam / n));
    }
}

TEST_CASE("compensated increment") {
    const auto levy = make_levy_measure({-0.3, 0.5}, {1.0, 2.0});
    const std::int32_t counts[] = {1, 0};
    const double theta[] = {2.0, 5.0};
    const double v = compensated_jump_increment(counts, levy, 0.1, theta);
    CHECK(v == doctest::Approx(2.0 * (1.0 - 0.1) + 5.0 * (0.0 - 0.2)));
    const double short_theta[] = {1.0};
    CHECK_THROWS_AS(compensated_jump_increment(counts, levy, 0.1, short_theta), InvalidArgument);
}

TEST_CASE("noise csv dump") {
    const auto np = sample_noise(build_time_grid(1.0, 3), default_levy_measure(), 2, 5);
    const auto path = std::filesystem::temp_directory_path() / "mfspde_noise_test.csv";
    write_noise_csv(np, path.string());
    std::ifstream in(path);
    std::string header, line;
    std::getline(in, header);
    CHECK(header == "scenario,step,dW,count_1,count_2");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 6);
    std::filesystem::remove(path);
}
