#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mfspde/discretization.hpp"

namespace mfspde {

/// Finite-activity discretization of the Levy measure: marks e_k != 0 with
/// intensities nu_k > 0.
struct LevyMeasure {
    std::vector<double> marks;
    std::vector<double> intensities;

    std::size_t size() const noexcept { return marks.size(); }
    double total_intensity() const noexcept;
    /// sum_k nu_k e_k^2
    double second_moment() const noexcept;
};

/// Validates marks/intensities; throws InvalidArgument.
LevyMeasure make_levy_measure(std::vector<double> marks, std::vector<double> intensities);

/// Default measure: marks {-0.3, +0.5}, intensities {1, 1}.
LevyMeasure default_levy_measure();

/// Brownian increments and per-mark Poisson counts for every scenario and step.
struct NoisePath {
    TimeGrid time;
    LevyMeasure levy;
    std::size_t n_scenarios = 0;
    std::uint64_t master_seed = 0;
    std::vector<double> dW;                // [s * n_steps + t]
    std::vector<std::int32_t> jump_counts; // [(s * n_steps + t) * K + k]

    std::size_t n_steps() const noexcept { return time.n_steps; }
    std::size_t n_marks() const noexcept { return levy.size(); }

    double brownian(std::size_t s, std::size_t t) const { return dW[s * time.n_steps + t]; }
    std::span<const std::int32_t> counts(std::size_t s, std::size_t t) const {
        const std::size_t k = levy.size();
        return {jump_counts.data() + (s * time.n_steps + t) * k, k};
    }
    /// count_k - nu_k dt
    double compensated(std::size_t s, std::size_t t, std::size_t k) const;

    bool operator==(const NoisePath&) const;
};

/// Stream seed for scenario s; depends only on (master_seed, s).
std::uint64_t scenario_stream_seed(std::uint64_t master_seed, std::size_t scenario);

/// Deterministic in (inputs, master_seed) and independent of `threads`.
NoisePath sample_noise(const TimeGrid& time, const LevyMeasure& levy, std::size_t n_scenarios,
                       std::uint64_t master_seed, std::size_t threads = 1);

/// sum_k theta_k (counts_k - nu_k dt): one step of the integral against the
/// compensated Poisson measure.
double compensated_jump_increment(std::span<const std::int32_t> counts, const LevyMeasure& levy,
                                  double dt, std::span<const double> theta_values);

/// CSV dump: scenario,step,dW,count_1..count_K
void write_noise_csv(const NoisePath& noise, const std::string& path);

}  // namespace mfspde
