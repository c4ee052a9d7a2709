#include "doctest.h"

#include <cmath>

#include "generators.hpp"
#include "mfspde/errors.hpp"
#include "mfspde/meanfield.hpp"

using namespace mfspde;
using mfspde::test::Gen;

namespace {

std::vector<MeanFieldOperator> all_kinds() {
    return {MeanFieldOperator::expectation(), MeanFieldOperator::square_moment(),
            MeanFieldOperator::exp_moment(0.7), MeanFieldOperator::scaled(-1.5)};
}

}  // namespace

TEST_CASE("values on a small ensemble") {
    const std::vector<double> x{1.0, 2.0, 3.0, 6.0};
    CHECK(MeanFieldOperator::expectation().apply(x) == 3.0);
    CHECK(MeanFieldOperator::square_moment().apply(x) == doctest::Approx(50.0 / 4.0));
    CHECK(MeanFieldOperator::scaled(2.0).apply(x) == 6.0);
    CHECK(MeanFieldOperator::exp_moment(1.0).apply(x) ==
          doctest::Approx((std::exp(1.0) + std::exp(2.0) + std::exp(3.0) + std::exp(6.0)) / 4.0));
}

TEST_CASE("empty ensembles are rejected") {
    const std::vector<double> none;
    for (const auto& op : all_kinds()) {
        CHECK_THROWS_AS(op.apply(none), InvalidArgument);
        CHECK_THROWS_AS(op.gradient(none), InvalidArgument);
    }
    CHECK_THROWS_AS(empirical_pairing(none, none), InvalidArgument);
}

TEST_CASE("property: gradient pairing equals the directional derivative") {
    mfspde::test::for_all(40, 17, [](Gen& gen, std::size_t) {
        const std::size_t M = gen.index(1, 300);
        const auto x = gen.vec(M, -1.0, 2.0);
        const auto z = gen.normals(M);
        for (const auto& op : all_kinds()) {
            const double eps = 1e-5;
            std::vector<double> xp(M), xm(M);
            for (std::size_t s = 0; s < M; ++s) {
                xp[s] = x[s] + eps * z[s];
                xm[s] = x[s] - eps * z[s];
            }
            const double fd = (op.apply(xp) - op.apply(xm)) / (2.0 * eps);
            const double pair = empirical_pairing(frechet_gradient(op, x), z);
            CHECK(pair == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
        }
    });
}

TEST_CASE("property: linear operators are linear") {
    mfspde::test::for_all(30, 23, [](Gen& gen, std::size_t) {
        const std::size_t M = gen.index(1, 100);
        const auto x = gen.normals(M), y = gen.normals(M);
        const double a = gen.uniform(-3, 3), b = gen.uniform(-3, 3);
        std::vector<double> w(M);
        for (std::size_t s = 0; s < M; ++s) w[s] = a * x[s] + b * y[s];
        for (const auto& op : {MeanFieldOperator::expectation(), MeanFieldOperator::scaled(0.4)}) {
            CHECK(op.apply(w) == doctest::Approx(a * op.apply(x) + b * op.apply(y)).scale(1.0));
        }
    });
}

TEST_CASE("property: applying to a constant ensemble") {
    mfspde::test::for_all(20, 29, [](Gen& gen, std::size_t) {
        const double c = gen.uniform(-2, 2);
        const std::vector<double> x(gen.index(1, 50), c);
        CHECK(MeanFieldOperator::expectation().apply(x) == doctest::Approx(c));
        CHECK(MeanFieldOperator::square_moment().apply(x) == doctest::Approx(c * c));
    });
}
