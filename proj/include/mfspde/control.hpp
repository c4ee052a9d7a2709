#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mfspde/adjoint.hpp"
#include "mfspde/forward.hpp"
#include "mfspde/regression.hpp"

namespace mfspde {

/// Delayed information flow E_t = F_{(t - delay)+}.
struct InfoFiltration {
    double delay = 0.0;
};

struct HamiltonianInputs {
    double t = 0.0, x = 0.0, y = 0.0, ybar = 0.0, u = 0.0, ubar = 0.0;
    double p = 0.0, q = 0.0;
    std::vector<double> gamma;  // one value per mark
};

/// f + b p + sigma q + sum_k theta(e_k) gamma_k nu_k. Throws DomainError when
/// the value is not finite (e.g. log of a nonpositive harvest).
double hamiltonian(const HamiltonianInputs& in, const CoefficientSet& coeffs,
                   const LevyMeasure& levy);

struct JEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::vector<double> per_scenario;
};

/// Left-endpoint in t, h-weighted sum over interior nodes in x:
///   mean_s [ sum_{t<N} dt h sum_i f + h sum_i g(Y_N, F(Y_N)) ].
JEstimate performance(const ForwardConfig& cfg, const ForwardPath& path);
/// Forward solve under the given noise, then performance().
JEstimate evaluate_J(const ForwardConfig& cfg, const NoisePath& noise, const ControlField& control);
/// Samples the noise from crn_seed first.
JEstimate evaluate_J(const ForwardConfig& cfg, const ControlField& control, std::size_t n_scenarios,
                     std::uint64_t crn_seed);

/// Mean difference a - b with the paired standard error (same noise).
struct PairedDifference {
    double diff = 0.0;
    double std_error = 0.0;
};
PairedDifference paired_difference(const JEstimate& a, const JEstimate& b);

/// Estimate of E[samples | E_t] for one node at step t, regressing on
/// Y_{t-d}(x_i) with d = round(delay / dt). When t - d <= 0 the information is
/// trivial and every estimate is the ensemble mean.
std::vector<double> project_conditional(std::span<const double> samples, std::size_t step,
                                        std::size_t node, const ForwardPath& path,
                                        const TimeGrid& time, const InfoFiltration& filt,
                                        const RegressionSpec& reg,
                                        RegressionDiagnostics* diag = nullptr);

/// r[t](s, i) = E[H_u | E_t] + mean(H_ubar) * grad G(u_t)(s, i), evaluated with
/// p_hat, q, gamma of the adjoint triple.
std::vector<FieldEnsemble> grad_H_field(const ForwardConfig& cfg, const ForwardPath& path,
                                        const AdjointTriple& adj, const InfoFiltration& filt,
                                        const RegressionSpec& reg,
                                        RegressionDiagnostics* diag = nullptr);

/// A point is clamp-active when the control sits on a bound and the residual
/// pushes it outward.
bool clamp_active(double u, double r, double u_min, double u_max);

struct ConcavityVerdict {
    bool pass = true;
    std::string function;  // "H" or "g" for a counterexample
    // witness pair (y, ybar, u, ubar) and the adjoint sample used
    double y1 = 0.0, ybar1 = 0.0, u1 = 0.0, ubar1 = 0.0;
    double y2 = 0.0, ybar2 = 0.0, u2 = 0.0, ubar2 = 0.0;
    double p = 0.0, q = 0.0;
    std::vector<double> gamma;
    double t = 0.0, x = 0.0;
    double gap = 0.0;  // (v1 + v2)/2 - v(mid), positive means violation
    std::size_t probes = 0;
};

struct AdjointSample {
    double p = 0.0, q = 0.0;
    std::vector<double> gamma;
};

/// Midpoint concavity test of (y, ybar, u, ubar) -> H and (y, ybar) -> g on
/// random pairs in the box, at the given adjoint samples (zero if empty).
/// The diagonal pair (lo, lo) / (hi, hi) and the anti-diagonal pair are
/// always tried first.
ConcavityVerdict check_concavity(const CoefficientSet& coeffs, const LevyMeasure& levy,
                                 const ProbeBox& box, std::span<const AdjointSample> samples,
                                 std::size_t probe_count, std::uint64_t seed);

/// Re-evaluates a witness; true when it violates the midpoint inequality.
bool witness_violates(const ConcavityVerdict& v, const CoefficientSet& coeffs,
                      const LevyMeasure& levy);

/// sup over (t, node) of the root-mean-square over scenarios of r, skipping
/// clamp-active samples. Also returns the largest single |r| via max_abs.
double residual_sup_rms(const std::vector<FieldEnsemble>& r, const ControlField& control,
                        double* max_abs = nullptr, std::size_t* n_excluded = nullptr);

struct MPReport {
    double sup_residual = 0.0;  // residual_sup_rms
    double max_abs_residual = 0.0;
    double median_scale = 0.0;  // median |y p_hat| over the tested points
    std::size_t n_points = 0;
    std::size_t n_excluded = 0;
    double J = 0.0;
    double J_std_error = 0.0;
    RegressionDiagnostics diagnostics;
    std::vector<FieldEnsemble> residual;  // r[t]
};

/// Forward, adjoint and residual field under `control`; the residual is
/// measured in L2 over scenarios and sup over (t, x), excluding clamp-active
/// samples.
MPReport check_necessary(const ForwardConfig& cfg, const NoisePath& noise,
                         const ControlField& control, const InfoFiltration& filt,
                         const RegressionSpec& reg);

struct GateauxResult {
    double fd_derivative = 0.0;
    double pairing_value = 0.0;
    std::vector<double> central_differences;  // one per z
};

/// Richardson-extrapolated central differences of J along beta under common
/// noise, against sum_t sum_i dt h mean_s r beta at the base control.
GateauxResult gateaux_J(const ForwardConfig& cfg, const NoisePath& noise,
                        const ControlField& control, const ControlField& beta,
                        std::span<const double> z_list, const InfoFiltration& filt,
                        const RegressionSpec& reg);

struct AscentResult {
    ControlField control;
    std::vector<double> J_trace;         // J before each step and after the last
    std::vector<double> residual_trace;  // residual_sup_rms, same indexing
    std::vector<FieldEnsemble> residual; // residual field at the final control
};

/// Projected ascent u <- clamp(u + eta r), r from grad_H_field, on one noise path.
AscentResult gradient_ascent(const ForwardConfig& cfg, const NoisePath& noise,
                             const ControlField& u0, std::size_t steps, double eta,
                             const InfoFiltration& filt, const RegressionSpec& reg);

}  // namespace mfspde
