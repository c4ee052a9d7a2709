#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mfspde {

/// A functional on L2(P), realized on a scenario ensemble, together with its
/// Frechet gradient as per-sample weights w_i. The directional derivative
/// along Z is the empirical pairing (1/M) sum_i w_i Z_i.
///
/// Three kinds are supported:
///   Expectation        F(X) = mean(X),        w_i = 1
///   SmoothedMoment     F(X) = mean(phi(X)),   w_i = phi'(X_i)
///   Scaled             F(X) = c * mean(X),    w_i = c
class MeanFieldOperator {
public:
    enum class Kind { Expectation, SmoothedMoment, Scaled };
    using ScalarFn = std::function<double(double)>;

    static MeanFieldOperator expectation();
    static MeanFieldOperator smoothed_moment(std::string name, ScalarFn phi, ScalarFn dphi);
    static MeanFieldOperator scaled(double c);
    /// phi(x) = x^2
    static MeanFieldOperator square_moment();
    /// phi(x) = exp(a x)
    static MeanFieldOperator exp_moment(double a);

    Kind kind() const noexcept { return kind_; }
    const std::string& name() const noexcept { return name_; }
    double scale() const noexcept { return scale_; }

    /// Throws InvalidArgument on an empty ensemble.
    double apply(std::span<const double> samples) const;
    std::vector<double> gradient(std::span<const double> samples) const;
    /// Gradient weights written into `out` (same length as samples).
    void gradient(std::span<const double> samples, std::span<double> out) const;

private:
    Kind kind_ = Kind::Expectation;
    std::string name_ = "expectation";
    double scale_ = 1.0;
    ScalarFn phi_;
    ScalarFn dphi_;
};

double apply_meanfield(const MeanFieldOperator& op, std::span<const double> samples);
std::vector<double> frechet_gradient(const MeanFieldOperator& op, std::span<const double> samples);

/// (1/M) sum_i w_i z_i
double empirical_pairing(std::span<const double> weights, std::span<const double> direction);

}  // namespace mfspde
