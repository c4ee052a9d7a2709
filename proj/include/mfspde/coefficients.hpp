#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

namespace mfspde {

/// Pointwise arguments (t, x, y, ybar, u, ubar) of a model coefficient.
struct PointArgs {
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
    double ybar = 0.0;
    double u = 0.0;
    double ubar = 0.0;
};

/// A coefficient value with its partial derivatives in (y, ybar, u, ubar).
struct Sensitivity {
    double value = 0.0;
    double dy = 0.0;
    double dybar = 0.0;
    double du = 0.0;
    double dubar = 0.0;
};

using PointFn = std::function<Sensitivity(const PointArgs&)>;
/// Jump coefficient theta(t,x,y,ybar,u,ubar,e) evaluated at one mark e.
using JumpFn = std::function<Sensitivity(const PointArgs&, double mark)>;
/// Terminal payoff g(x, y, ybar); only value, dy, dybar are meaningful.
using TerminalFn = std::function<Sensitivity(double x, double y, double ybar)>;
/// Dirichlet data eta(t, x) on the boundary of D.
using BoundaryFn = std::function<double(double t, double x)>;

/// Model functions b, sigma, theta, f, g with partials. An empty function is
/// the zero coefficient.
struct CoefficientSet {
    std::string name = "custom";
    PointFn drift;       // b
    PointFn diffusion;   // sigma
    JumpFn jump;         // theta
    PointFn running;     // f
    TerminalFn terminal; // g
    BoundaryFn boundary; // eta; empty means zero boundary values
    /// Enables positivity-preserving stepping for multiplicative models.
    bool positivity = false;
    double positivity_floor = 1e-8;

    Sensitivity b(const PointArgs& a) const { return drift ? drift(a) : Sensitivity{}; }
    Sensitivity sigma(const PointArgs& a) const { return diffusion ? diffusion(a) : Sensitivity{}; }
    Sensitivity theta(const PointArgs& a, double e) const { return jump ? jump(a, e) : Sensitivity{}; }
    Sensitivity f(const PointArgs& a) const { return running ? running(a) : Sensitivity{}; }
    Sensitivity g(double x, double y, double ybar) const {
        return terminal ? terminal(x, y, ybar) : Sensitivity{};
    }
    double eta(double t, double x) const { return boundary ? boundary(t, x) : 0.0; }
};

struct ProbeBox {
    double y_lo = 0.1, y_hi = 2.0;
    double ybar_lo = 0.1, ybar_hi = 2.0;
    double u_lo = 0.1, u_hi = 2.0;
    double ubar_lo = 0.1, ubar_hi = 2.0;
    double t_lo = 0.0, t_hi = 1.0;
    double x_lo = 0.0, x_hi = 1.0;
};

struct LipschitzProbe {
    double max_ratio = 0.0;  // sup |b1-b2| / (|y1-y2| + |ybar1-ybar2|)
    bool within = false;     // max_ratio <= c_probe
};

/// Spot Lipschitz probe of the drift in (y, ybar) at random argument pairs.
LipschitzProbe probe_lipschitz(const CoefficientSet& coeffs, double c_probe, const ProbeBox& box,
                               std::size_t n_pairs, std::uint64_t seed);

struct DerivativeCheck {
    double max_rel_error = 0.0;
    std::string worst;  // "<coefficient>.<partial>"
    bool passed = false;
};

/// Compares every supplied partial with central finite differences at random
/// points; relative tolerance rel_tol.
DerivativeCheck check_derivatives(const CoefficientSet& coeffs, const ProbeBox& box,
                                  std::span<const double> marks, std::size_t n_points,
                                  std::uint64_t seed, double rel_tol = 1e-4);

}  // namespace mfspde
