#include "mfspde/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfspde/errors.hpp"

namespace mfspde {

void RegressionDiagnostics::merge(const RegressionDiagnostics& o) {
    fits += o.fits;
    fallbacks += o.fallbacks;
    max_condition = std::max(max_condition, o.max_condition);
}

LocalRegressor::LocalRegressor(std::span<const double> feature, const RegressionSpec& spec,
                               RegressionDiagnostics* diag)
    : n_samples_(feature.size()), clip_(spec.clip_to_range) {
    if (feature.empty()) throw InvalidArgument("regression on an empty sample");
    if (spec.ridge < 0.0) throw InvalidArgument("ridge must be nonnegative");
    const auto M = static_cast<double>(n_samples_);

    std::vector<double> x(feature.begin(), feature.end());
    if (spec.log_feature && std::all_of(x.begin(), x.end(), [](double v) { return v > 0.0; })) {
        for (auto& v : x) v = std::log(v);
    }
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= M;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / M);

    if (diag) ++diag->fits;
    if (spec.degree == 0 || !(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
        fallback_ = spec.degree != 0;
        if (fallback_ && diag) ++diag->fallbacks;
        return;
    }

    const auto cols = static_cast<Eigen::Index>(spec.degree + 1);
    basis_.resize(static_cast<Eigen::Index>(n_samples_), cols);
    for (std::size_t s = 0; s < n_samples_; ++s) {
        const double z = (x[s] - mean) / sd;
        double pw = 1.0;
        for (Eigen::Index c = 0; c < cols; ++c) {
            basis_(static_cast<Eigen::Index>(s), c) = pw;
            pw *= z;
        }
    }
    Eigen::MatrixXd A = basis_.transpose() * basis_ / M;
    // the intercept is not penalized so constants are reproduced exactly
    for (Eigen::Index c = 1; c < cols; ++c) A(c, c) += spec.ridge;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    condition_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (diag) diag->max_condition = std::max(diag->max_condition, condition_);
    if (!(condition_ <= spec.max_condition)) {
        fallback_ = true;
        basis_.resize(0, 0);
        if (diag) ++diag->fallbacks;
        return;
    }
    normal_.compute(A);
}

void LocalRegressor::project(std::span<const double> target, std::span<double> out) const {
    if (target.size() != n_samples_ || out.size() != n_samples_) {
        throw InvalidArgument("regression target size mismatch");
    }
    if (basis_.size() == 0) {
        double mean = 0.0;
        for (double v : target) mean += v;
        mean /= static_cast<double>(n_samples_);
        std::fill(out.begin(), out.end(), mean);
        return;
    }
    const Eigen::Map<const Eigen::VectorXd> y(target.data(), static_cast<Eigen::Index>(n_samples_));
    const Eigen::VectorXd rhs = basis_.transpose() * y / static_cast<double>(n_samples_);
    const Eigen::VectorXd coef = normal_.solve(rhs);
    Eigen::Map<Eigen::VectorXd> o(out.data(), static_cast<Eigen::Index>(n_samples_));
    o = basis_ * coef;
    if (clip_) {
        const auto [lo, hi] = std::minmax_element(target.begin(), target.end());
        for (auto& v : out) v = std::clamp(v, *lo, *hi);
    }
}

std::vector<double> LocalRegressor::project(std::span<const double> target) const {
    std::vector<double> out(target.size());
    project(target, out);
    return out;
}

std::vector<double> conditional_expectation(std::span<const double> feature,
                                            std::span<const double> target,
                                            const RegressionSpec& spec,
                                            RegressionDiagnostics* diag) {
    return LocalRegressor(feature, spec, diag).project(target);
}

}  // namespace mfspde
