#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "mfspde/control.hpp"
#include "mfspde/forward.hpp"
#include "mfspde/harvesting.hpp"

namespace mfspde {

/// One value of the key/value config format: a number, bool, string or a
/// single-line array of numbers or strings. The raw token is kept so integers
/// beyond 2^53 survive.
struct ConfigValue {
    std::variant<double, bool, std::string, std::vector<double>, std::vector<std::string>> value;
    std::string raw;
    int line = 0;
};

/// Flat map "section.key" -> value, parsed from a TOML-style subset:
/// [section] / [section.sub] headers, key = value lines, # comments.
class ConfigDocument {
public:
    static ConfigDocument parse(const std::string& text);

    const std::map<std::string, ConfigValue>& entries() const noexcept { return entries_; }
    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    double number(const std::string& key, double fallback) const;
    std::uint64_t integer(const std::string& key, std::uint64_t fallback) const;
    bool boolean(const std::string& key, bool fallback) const;
    std::string string(const std::string& key, const std::string& fallback) const;
    std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::string> strings(const std::string& key,
                                     const std::vector<std::string>& fallback) const;

private:
    const ConfigValue* find(const std::string& key) const;
    std::map<std::string, ConfigValue> entries_;
};

struct MeanFieldChoice {
    std::string type = "expectation";  // expectation | smoothed_moment | scaled
    std::string phi = "square";        // square | exp_scale (smoothed_moment only)
    double a = 1.0;                    // exp_scale rate, or the scale c of "scaled"

    bool operator==(const MeanFieldChoice&) const = default;
};

struct RunConfig {
    // [grid]
    double x_min = 0.0;
    double x_max = 1.0;
    std::size_t n_interior = 20;
    double kappa = 0.5;
    // [time]
    double T = 1.0;
    std::size_t n_steps = 100;
    // [noise]
    std::vector<double> marks{-0.3, 0.5};
    std::vector<double> intensities{1.0, 1.0};
    std::uint64_t master_seed = 20240607;
    std::size_t n_scenarios = 2000;
    // [model]
    std::string preset = "harvesting";  // harvesting | linear_test | heat
    double b = 0.5;
    double sigma = 0.2;
    double theta_scale = 1.0;
    double alpha = 1.0;
    std::string y0 = "default";  // default | sine | sine_bump | constant
    double y0_value = 1.0;
    MeanFieldChoice F;
    MeanFieldChoice G;
    // [control]
    std::string control_mode = "constant";
    double control_value = 1.0;
    double u_min = 1e-3;
    double u_max = 50.0;
    double delay = 0.0;
    // [solver]
    std::size_t reg_degree = 2;
    double ridge = 1e-8;
    bool log_feature = true;
    double damping = 0.5;
    double tol_fp = 1e-3;
    std::size_t max_outer = 30;
    std::size_t picard_iters = 6;
    std::size_t ascent_steps = 20;
    double ascent_eta = 1e-3;
    std::size_t n_challengers = 20;
    std::uint64_t challenger_seed = 7;
    std::size_t threads = 1;
    // [output]
    std::string output_dir = "results";

    bool operator==(const RunConfig&) const = default;
};

/// Parses and validates; throws ConfigError naming the field (and the line
/// when the value came from the text).
RunConfig parse_run_config(const std::string& text);
/// Reads the file first; a missing file is a ConfigError naming the path.
RunConfig load_run_config(const std::string& path);
/// Canonical text form with every field; parse_run_config(to_config_text(c)) == c.
std::string to_config_text(const RunConfig& c);
void validate_run_config(const RunConfig& c);

MeanFieldOperator make_meanfield(const MeanFieldChoice& choice);
RegressionSpec make_regression(const RunConfig& c);
ForwardConfig make_forward_config(const RunConfig& c);
ControlField make_control(const RunConfig& c);
HarvestingProblem make_harvesting_problem(const RunConfig& c);
HarvestingOptions make_harvesting_options(const RunConfig& c);

}  // namespace mfspde
