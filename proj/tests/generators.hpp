#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace mfspde::test {

/// Small seeded source of random test inputs.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
    std::size_t index(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
    }
    std::uint64_t seed() { return rng_(); }
    bool coin() { return uniform(0.0, 1.0) < 0.5; }

    std::vector<double> vec(std::size_t n, double lo, double hi) {
        std::vector<double> v(n);
        for (auto& x : v) x = uniform(lo, hi);
        return v;
    }
    std::vector<double> normals(std::size_t n) {
        std::vector<double> v(n);
        for (auto& x : v) x = normal();
        return v;
    }

private:
    std::mt19937_64 rng_;
};

/// Runs prop(gen, case_index) for n cases from one base seed.
template <typename Prop>
void for_all(std::size_t n, std::uint64_t seed, Prop&& prop) {
    Gen gen(seed);
    for (std::size_t k = 0; k < n; ++k) prop(gen, k);
}

}  // namespace mfspde::test
