#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mfspde {

/// Least-squares estimator of conditional expectations on a polynomial basis
/// in one standardized feature.
struct RegressionSpec {
    std::size_t degree = 2;
    double ridge = 1e-8;
    /// Fits whose normal matrix is worse conditioned than this fall back to
    /// the ensemble mean.
    double max_condition = 1e12;
    /// Regress on log(feature) when every sample is positive.
    bool log_feature = false;
    /// Clip fitted values to the range of the target sample, which guards
    /// against polynomial extrapolation in sparse tails.
    bool clip_to_range = true;
};

struct RegressionDiagnostics {
    std::size_t fits = 0;
    std::size_t fallbacks = 0;
    double max_condition = 0.0;

    void merge(const RegressionDiagnostics& o);
};

/// Regression of arbitrary targets on basis(feature) for one fixed feature
/// sample. The normal matrix is factored once; every projection reuses it.
class LocalRegressor {
public:
    LocalRegressor(std::span<const double> feature, const RegressionSpec& spec,
                   RegressionDiagnostics* diag = nullptr);

    /// Fitted values of `target` at every sample.
    void project(std::span<const double> target, std::span<double> out) const;
    std::vector<double> project(std::span<const double> target) const;

    /// True when the fit degenerated to the ensemble mean.
    bool fallback() const noexcept { return fallback_; }
    double condition() const noexcept { return condition_; }

private:
    std::size_t n_samples_ = 0;
    bool fallback_ = false;
    bool clip_ = true;
    double condition_ = 1.0;
    Eigen::MatrixXd basis_;  // n_samples x (degree + 1)
    Eigen::LDLT<Eigen::MatrixXd> normal_;
};

/// Convenience: one projection of target on basis(feature).
std::vector<double> conditional_expectation(std::span<const double> feature,
                                            std::span<const double> target,
                                            const RegressionSpec& spec,
                                            RegressionDiagnostics* diag = nullptr);

}  // namespace mfspde
