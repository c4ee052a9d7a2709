#include "mfspde/presets.hpp"

#include <cmath>
#include <limits>

namespace mfspde {

CoefficientSet harvesting_coefficients(SpaceTimeFn b, SpaceTimeFn sigma, JumpScaleFn theta,
                                       SpaceFn alpha) {
    CoefficientSet c;
    c.name = "harvesting";
    c.positivity = true;
    c.drift = [b](const PointArgs& a) {
        const double bt = b(a.t, a.x);
        return Sensitivity{bt * a.ybar - a.y * a.u, -a.u, bt, -a.y, 0.0};
    };
    c.diffusion = [sigma](const PointArgs& a) {
        const double s = sigma(a.t, a.x);
        return Sensitivity{s * a.y, s, 0.0, 0.0, 0.0};
    };
    c.jump = [theta](const PointArgs& a, double e) {
        const double th = theta(a.t, a.x, e);
        return Sensitivity{th * a.y, th, 0.0, 0.0, 0.0};
    };
    c.running = [](const PointArgs& a) {
        if (!(a.y > 0.0) || !(a.u > 0.0)) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            return Sensitivity{nan, nan, 0.0, nan, 0.0};
        }
        return Sensitivity{std::log(a.y * a.u), 1.0 / a.y, 0.0, 1.0 / a.u, 0.0};
    };
    c.terminal = [alpha](double x, double y, double) {
        const double al = alpha(x);
        return Sensitivity{al * y, al, 0.0, 0.0, 0.0};
    };
    return c;
}

CoefficientSet harvesting_coefficients(double b, double sigma, double theta_scale, double alpha) {
    return harvesting_coefficients([b](double, double) { return b; },
                                   [sigma](double, double) { return sigma; },
                                   [theta_scale](double, double, double e) { return theta_scale * e; },
                                   [alpha](double) { return alpha; });
}

CoefficientSet linear_test_coefficients() {
    CoefficientSet c;
    c.name = "linear_test";
    c.drift = [](const PointArgs& a) {
        return Sensitivity{-0.5 * a.y + 0.3 * a.ybar + a.u, -0.5, 0.3, 1.0, 0.0};
    };
    c.diffusion = [](const PointArgs& a) { return Sensitivity{0.1 * a.y, 0.1, 0.0, 0.0, 0.0}; };
    c.jump = [](const PointArgs& a, double e) {
        return Sensitivity{0.2 * e * a.y, 0.2 * e, 0.0, 0.0, 0.0};
    };
    c.running = [](const PointArgs& a) {
        return Sensitivity{-0.5 * a.y * a.y - 0.5 * a.u * a.u + a.y, 1.0 - a.y, 0.0, -a.u, 0.0};
    };
    c.terminal = [](double, double y, double) { return Sensitivity{y, 1.0, 0.0, 0.0, 0.0}; };
    return c;
}

CoefficientSet heat_coefficients() {
    CoefficientSet c;
    c.name = "heat";
    return c;
}

}  // namespace mfspde
