#include "mfspde/meanfield.hpp"

#include <cmath>

#include "mfspde/errors.hpp"

namespace mfspde {

MeanFieldOperator MeanFieldOperator::expectation() { return MeanFieldOperator{}; }

MeanFieldOperator MeanFieldOperator::smoothed_moment(std::string name, ScalarFn phi, ScalarFn dphi) {
    if (!phi || !dphi) throw InvalidArgument("smoothed moment requires phi and phi'");
    MeanFieldOperator op;
    op.kind_ = Kind::SmoothedMoment;
    op.name_ = std::move(name);
    op.phi_ = std::move(phi);
    op.dphi_ = std::move(dphi);
    return op;
}

MeanFieldOperator MeanFieldOperator::scaled(double c) {
    MeanFieldOperator op;
    op.kind_ = Kind::Scaled;
    op.name_ = "scaled";
    op.scale_ = c;
    return op;
}

MeanFieldOperator MeanFieldOperator::square_moment() {
    return smoothed_moment("square", [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

MeanFieldOperator MeanFieldOperator::exp_moment(double a) {
    auto op = smoothed_moment(
        "exp_scale", [a](double x) { return std::exp(a * x); },
        [a](double x) { return a * std::exp(a * x); });
    op.scale_ = a;
    return op;
}

double MeanFieldOperator::apply(std::span<const double> samples) const {
    if (samples.empty()) throw InvalidArgument("mean-field operator on an empty ensemble");
    double acc = 0.0;
    if (kind_ == Kind::SmoothedMoment) {
        for (double x : samples) acc += phi_(x);
    } else {
        for (double x : samples) acc += x;
    }
    acc /= static_cast<double>(samples.size());
    return kind_ == Kind::Scaled ? scale_ * acc : acc;
}

void MeanFieldOperator::gradient(std::span<const double> samples, std::span<double> out) const {
    if (samples.empty()) throw InvalidArgument("mean-field gradient on an empty ensemble");
    if (out.size() != samples.size()) throw InvalidArgument("gradient output length mismatch");
    switch (kind_) {
        case Kind::Expectation:
            for (auto& w : out) w = 1.0;
            break;
        case Kind::Scaled:
            for (auto& w : out) w = scale_;
            break;
        case Kind::SmoothedMoment:
            for (std::size_t i = 0; i < samples.size(); ++i) out[i] = dphi_(samples[i]);
            break;
    }
}

std::vector<double> MeanFieldOperator::gradient(std::span<const double> samples) const {
    std::vector<double> out(samples.size());
    gradient(samples, out);
    return out;
}

double apply_meanfield(const MeanFieldOperator& op, std::span<const double> samples) {
    return op.apply(samples);
}

std::vector<double> frechet_gradient(const MeanFieldOperator& op, std::span<const double> samples) {
    return op.gradient(samples);
}

double empirical_pairing(std::span<const double> weights, std::span<const double> direction) {
    if (weights.size() != direction.size() || weights.empty()) {
        throw InvalidArgument("pairing: length mismatch or empty ensemble");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) acc += weights[i] * direction[i];
    return acc / static_cast<double>(weights.size());
}

}  // namespace mfspde
