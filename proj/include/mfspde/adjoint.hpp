#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mfspde/field.hpp"
#include "mfspde/forward.hpp"
#include "mfspde/regression.hpp"

namespace mfspde {

/// Adjoint processes on the step grid. p has n_steps + 1 levels; the others
/// are defined on steps 0..n_steps-1. p_hat[t] is the regression estimate of
/// the propagated costate E[(I - dt L*)^{-1} p_{t+1} | Y_t] and is the value
/// entering the Hamiltonian at step t.
struct AdjointTriple {
    std::vector<FieldEnsemble> p;
    std::vector<FieldEnsemble> p_hat;
    std::vector<FieldEnsemble> q;
    std::vector<std::vector<FieldEnsemble>> gamma;  // [t][k]

    std::size_t n_steps() const noexcept { return p.empty() ? 0 : p.size() - 1; }
};

/// H and its partials in (y, ybar, u, ubar) at one point:
///   H = f + b p + sigma q + sum_k theta(e_k) gamma_k nu_k
Sensitivity hamiltonian_sensitivity(const CoefficientSet& coeffs, const LevyMeasure& levy,
                                    const PointArgs& a, double p, double q,
                                    std::span<const double> gamma);

/// p(T) = g_y + mean(g_ybar) * grad F(Y_T), per scenario and node.
FieldEnsemble terminal_condition(const ForwardConfig& cfg, const ForwardPath& path);

struct AdjointResult {
    AdjointTriple triple;
    RegressionDiagnostics diagnostics;
};

/// Backward sweep, t = n_steps-1..0:
///   R     = (I - dt L*)^{-1} p_{t+1}
///   p_hat = E[R | Y_t],  q = E[R dW | Y_t] / dt,  gamma_k = E[R dN_k | Y_t] / (nu_k dt)
///   p_t   = p_hat + dt (H_y + mean(H_ybar) grad F(Y_t))
/// with conditional expectations regressed node-wise on the local state.
AdjointResult solve_adjoint(const ForwardConfig& cfg, const NoisePath& noise,
                            const ForwardPath& path, const RegressionSpec& reg);

/// Generator of the standalone backward equation
///   dY = A Y dt + f(t, Y, H(Y), Z, J(Z), U, K(U)) dt + Z dW + int U dN~,  Y_T = xi
/// with A = -L. Arguments: (t, x, y, ybar, z, zbar, U_k, Kbar_k).
struct BackwardGenerator {
    using Fn = std::function<double(double t, double x, double y, double ybar, double z,
                                    double zbar, std::span<const double> u,
                                    std::span<const double> ubar)>;
    Fn f;
    MeanFieldOperator H = MeanFieldOperator::expectation();
    MeanFieldOperator J = MeanFieldOperator::expectation();
    MeanFieldOperator K = MeanFieldOperator::expectation();
};

/// -y/2 + 0.8 sin(ybar) + 0.3 z + 0.5 tanh(zbar) + 0.2 sum nu_k U_k + 0.4 sum nu_k Kbar_k,
/// with H = expectation, J = 0.5 * expectation, K = expectation.
BackwardGenerator lipschitz_meanfield_generator(const LevyMeasure& levy);

/// Same linear part without any mean-field argument.
BackwardGenerator local_generator(const LevyMeasure& levy);

struct BackwardIterate {
    std::vector<FieldEnsemble> Y;                // 0..n_steps
    std::vector<FieldEnsemble> Z;                // 0..n_steps-1
    std::vector<std::vector<FieldEnsemble>> U;   // [t][k]
};

struct PicardBackwardResult {
    std::vector<double> distances;  // d_n between iterates n+1 and n, n = 1..n_iters
    std::vector<double> ratios;     // d_{n+1} / d_n
    BackwardIterate last;
    RegressionDiagnostics diagnostics;
};

/// Picard iteration from the zero triple with mean-field arguments frozen at
/// the previous iterate. Regression features are the forward states of
/// `path`; xi is the terminal value. Distances use the weighted norm
///   sum_t dt e^{weight t} (E|dY_t|_H^2 + E|dZ_t|_H^2 + E sum_k nu_k |dU_k,t|_H^2).
PicardBackwardResult picard_backward(const ForwardConfig& cfg, const NoisePath& noise,
                                     const ForwardPath& path, const FieldEnsemble& xi,
                                     const BackwardGenerator& gen, const RegressionSpec& reg,
                                     std::size_t n_iters, double weight = 1.0);

}  // namespace mfspde
