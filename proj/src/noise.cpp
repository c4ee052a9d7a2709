#include "mfspde/noise.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>

#include "mfspde/errors.hpp"
#include "mfspde/parallel.hpp"

namespace mfspde {

double LevyMeasure::total_intensity() const noexcept {
    double acc = 0.0;
    for (double v : intensities) acc += v;
    return acc;
}

double LevyMeasure::second_moment() const noexcept {
    double acc = 0.0;
    for (std::size_t k = 0; k < marks.size(); ++k) acc += intensities[k] * marks[k] * marks[k];
    return acc;
}

LevyMeasure make_levy_measure(std::vector<double> marks, std::vector<double> intensities) {
    if (marks.size() != intensities.size()) {
        throw InvalidArgument("levy measure: marks and intensities differ in length");
    }
    for (std::size_t k = 0; k < marks.size(); ++k) {
        if (marks[k] == 0.0 || !std::isfinite(marks[k])) {
            throw InvalidArgument("levy measure: marks must be finite and nonzero");
        }
        if (!(intensities[k] > 0.0) || !std::isfinite(intensities[k])) {
            throw InvalidArgument("levy measure: intensities must be finite and positive");
        }
    }
    return LevyMeasure{std::move(marks), std::move(intensities)};
}

LevyMeasure default_levy_measure() { return make_levy_measure({-0.3, 0.5}, {1.0, 1.0}); }

double NoisePath::compensated(std::size_t s, std::size_t t, std::size_t k) const {
    return static_cast<double>(counts(s, t)[k]) - levy.intensities[k] * time.dt();
}

bool NoisePath::operator==(const NoisePath& o) const {
    return n_scenarios == o.n_scenarios && master_seed == o.master_seed &&
           time.n_steps == o.time.n_steps && time.T == o.time.T && levy.marks == o.levy.marks &&
           levy.intensities == o.levy.intensities && dW == o.dW && jump_counts == o.jump_counts;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t scenario_stream_seed(std::uint64_t master_seed, std::size_t scenario) {
    return splitmix64(splitmix64(master_seed) ^ splitmix64(0x5ce7a110ULL + scenario));
}

NoisePath sample_noise(const TimeGrid& time, const LevyMeasure& levy, std::size_t n_scenarios,
                       std::uint64_t master_seed, std::size_t threads) {
    if (n_scenarios == 0) throw InvalidArgument("n_scenarios must be >= 1");
    if (!(time.dt() > 0.0)) throw InvalidArgument("dt must be positive");
    NoisePath np;
    np.time = time;
    np.levy = levy;
    np.n_scenarios = n_scenarios;
    np.master_seed = master_seed;
    const std::size_t n_steps = time.n_steps;
    const std::size_t K = levy.size();
    np.dW.resize(n_scenarios * n_steps);
    np.jump_counts.resize(n_scenarios * n_steps * K);
    const double sqrt_dt = std::sqrt(time.dt());

    parallel_for(n_scenarios, threads, [&](std::size_t s) {
        std::mt19937_64 rng(scenario_stream_seed(master_seed, s));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<std::poisson_distribution<std::int32_t>> poisson;
        poisson.reserve(K);
        for (std::size_t k = 0; k < K; ++k) poisson.emplace_back(levy.intensities[k] * time.dt());
        for (std::size_t t = 0; t < n_steps; ++t) {
            np.dW[s * n_steps + t] = sqrt_dt * normal(rng);
            for (std::size_t k = 0; k < K; ++k) {
                np.jump_counts[(s * n_steps + t) * K + k] = poisson[k](rng);
            }
        }
    });
    return np;
}

double compensated_jump_increment(std::span<const std::int32_t> counts, const LevyMeasure& levy,
                                  double dt, std::span<const double> theta_values) {
    if (counts.size() != levy.size() || theta_values.size() != levy.size()) {
        throw InvalidArgument("compensated_jump_increment: length mismatch");
    }
    if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
    double acc = 0.0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        acc += theta_values[k] * (static_cast<double>(counts[k]) - levy.intensities[k] * dt);
    }
    return acc;
}

void write_noise_csv(const NoisePath& noise, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << "scenario,step,dW";
    for (std::size_t k = 0; k < noise.n_marks(); ++k) out << ",count_" << (k + 1);
    out << '\n' << std::setprecision(17);
    for (std::size_t s = 0; s < noise.n_scenarios; ++s) {
        for (std::size_t t = 0; t < noise.n_steps(); ++t) {
            out << s << ',' << t << ',' << noise.brownian(s, t);
            for (auto c : noise.counts(s, t)) out << ',' << c;
            out << '\n';
        }
    }
}

}  // namespace mfspde
