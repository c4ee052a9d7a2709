#pragma once

#include <functional>

#include "mfspde/coefficients.hpp"

namespace mfspde {

using SpaceTimeFn = std::function<double(double t, double x)>;
using JumpScaleFn = std::function<double(double t, double x, double e)>;
using SpaceFn = std::function<double(double x)>;

/// Population model with harvesting:
///   b = b(t,x) ybar - y u,  sigma = sigma(t,x) y,  theta = theta(t,x,e) y,
///   f = log(y u),  g = alpha(x) y.
/// Positivity-preserving stepping is switched on.
CoefficientSet harvesting_coefficients(SpaceTimeFn b, SpaceTimeFn sigma, JumpScaleFn theta,
                                       SpaceFn alpha);
/// Constant-parameter version with theta(e) = theta_scale * e.
CoefficientSet harvesting_coefficients(double b, double sigma, double theta_scale, double alpha);

/// Concave linear-quadratic test model:
///   b = -y/2 + 0.3 ybar + u,  sigma = 0.1 y,  theta = 0.2 e y,
///   f = -y^2/2 - u^2/2 + y,  g = y.
CoefficientSet linear_test_coefficients();

/// All coefficients zero: the forward solver reduces to the implicit heat scheme.
CoefficientSet heat_coefficients();

}  // namespace mfspde
