#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mfspde/coefficients.hpp"
#include "mfspde/discretization.hpp"
#include "mfspde/field.hpp"
#include "mfspde/meanfield.hpp"
#include "mfspde/noise.hpp"

namespace mfspde {

/// Control process u(t, x) on the step grid t = 0..n_steps-1.
///
/// Deterministic controls hold one value per (step, node); adapted controls
/// hold one value per (step, scenario, node); feedback controls are a map
/// evaluated on the current state during the forward sweep and are realized
/// into an adapted array on the resulting path.
class ControlField {
public:
    enum class Mode { Deterministic, Adapted, Feedback };
    /// (step, node, t, x, y) -> control value before clamping
    using FeedbackFn =
        std::function<double(std::size_t step, std::size_t node, double t, double x, double y)>;

    ControlField() = default;

    static ControlField constant(std::size_t n_steps, std::size_t n_nodes, double value,
                                 double u_min, double u_max);
    static ControlField deterministic(std::size_t n_steps, std::size_t n_nodes,
                                      std::vector<double> values, double u_min, double u_max);
    static ControlField adapted(std::size_t n_steps, std::size_t n_scenarios, std::size_t n_nodes,
                                std::vector<double> values, double u_min, double u_max);
    static ControlField feedback(std::size_t n_steps, std::size_t n_nodes, FeedbackFn fn,
                                 double u_min, double u_max);

    Mode mode() const noexcept { return mode_; }
    std::size_t n_steps() const noexcept { return n_steps_; }
    std::size_t n_scenarios() const noexcept { return n_scenarios_; }
    std::size_t n_nodes() const noexcept { return n_nodes_; }
    double u_min() const noexcept { return u_min_; }
    double u_max() const noexcept { return u_max_; }
    const FeedbackFn& feedback_fn() const noexcept { return feedback_; }
    const std::vector<double>& values() const noexcept { return values_; }

    /// Value at (step, scenario, node). Not available for feedback controls.
    double value(std::size_t step, std::size_t s, std::size_t i) const {
        return mode_ == Mode::Deterministic ? values_[step * n_nodes_ + i]
                                            : values_[(step * n_scenarios_ + s) * n_nodes_ + i];
    }

    bool within_bounds() const;
    /// Projection onto [u_min, u_max].
    ControlField clamped() const;
    /// Adapted copy for the given scenario count.
    ControlField as_adapted(std::size_t n_scenarios) const;

    bool operator==(const ControlField& o) const {
        return mode_ == o.mode_ && n_steps_ == o.n_steps_ && n_scenarios_ == o.n_scenarios_ &&
               n_nodes_ == o.n_nodes_ && u_min_ == o.u_min_ && u_max_ == o.u_max_ &&
               values_ == o.values_;
    }

private:
    Mode mode_ = Mode::Deterministic;
    std::size_t n_steps_ = 0;
    std::size_t n_scenarios_ = 0;
    std::size_t n_nodes_ = 0;
    double u_min_ = 0.0;
    double u_max_ = 0.0;
    std::vector<double> values_;
    FeedbackFn feedback_;
};

/// base + z * direction, evaluated pointwise. Bounds come from base; the result
/// is not clamped.
ControlField perturb_control(const ControlField& base, const ControlField& direction, double z,
                             std::size_t n_scenarios);

/// Everything the forward sweep needs apart from noise and control.
struct ForwardConfig {
    SpatialGrid grid;
    DiscreteOperator op;
    TimeGrid time;
    LevyMeasure levy;
    CoefficientSet coeffs;
    MeanFieldOperator F = MeanFieldOperator::expectation();
    MeanFieldOperator G = MeanFieldOperator::expectation();
    std::vector<double> initial;  // xi at interior nodes
    std::size_t threads = 1;
    /// Positivity violation when floor hits exceed this fraction of cell updates.
    double max_floor_fraction = 0.01;
};

struct ForwardPath {
    std::vector<FieldEnsemble> states;           // t = 0..n_steps
    std::vector<std::vector<double>> mean_trace; // F(Y(t, x_i)), t = 0..n_steps
    std::vector<std::vector<double>> control_trace; // G(u(t, x_i)), t = 0..n_steps-1
    ControlField control;                        // realized control (never Feedback)
    std::size_t floor_hits = 0;

    std::size_t n_steps() const noexcept { return states.empty() ? 0 : states.size() - 1; }
    std::size_t n_scenarios() const noexcept { return states.empty() ? 0 : states[0].n_scenarios(); }
    std::size_t n_nodes() const noexcept { return states.empty() ? 0 : states[0].n_nodes(); }
};

/// One semi-implicit step from `step` to `step + 1`:
///   (I - dt L) Y_{t+1} = Y_t + dt b + sigma dW + sum_k theta_k (N_k - nu_k dt)
/// with ybar = F(Y_t) and ubar = G(u_t) node-wise, boundary data injected into
/// the first and last rows. `control_values` is the (scenario, node) slice of
/// the control at this step. When `frozen_ybar` is given it replaces F(Y_t).
FieldEnsemble step_forward(const FieldEnsemble& state, std::size_t step, const ForwardConfig& cfg,
                           std::span<const double> control_values, const NoisePath& noise,
                           std::span<const double> frozen_ybar = {},
                           std::size_t* floor_hits = nullptr);

/// Full path from xi. Deterministic given the noise.
ForwardPath solve_forward(const ForwardConfig& cfg, const NoisePath& noise,
                          const ControlField& control);

/// Forward sweep with the mean-field argument taken from a given trace
/// (one vector per time level) instead of the current ensemble.
ForwardPath solve_forward_frozen(const ForwardConfig& cfg, const NoisePath& noise,
                                 const ControlField& control,
                                 const std::vector<std::vector<double>>& frozen_trace);

struct PicardForwardResult {
    std::vector<double> distances;     // d_n = mean_s sup_t |Y^{n+1} - Y^n|_H^2, n = 1..n_iters
    double distance_to_fixed_point = 0.0;
    std::vector<double> decay_rates;   // log(d_n / d_{n+1}) while above round-off
    bool decay_accelerating = false;   // decay_rates strictly increasing
    double factorial_slope = 0.0;      // least-squares slope of log d_n against log(n!)
};

/// Picard scheme with the mean-field argument frozen at the previous iterate,
/// starting from Y^0 = xi and using the same noise for every iterate.
PicardForwardResult picard_forward(const ForwardConfig& cfg, const NoisePath& noise,
                                   const ControlField& control, std::size_t n_iters);

/// mean over scenarios of sup over t of |a_t - b_t|_H^2
double path_distance_sup_H(const SpatialGrid& grid, const std::vector<FieldEnsemble>& a,
                           const std::vector<FieldEnsemble>& b);

/// Derivative of the path along the control direction beta: the linearized
/// scheme with zero initial and boundary values, the same noise and
/// mean-field pairings weighted by grad F, grad G at the base path.
std::vector<FieldEnsemble> derivative_process(const ForwardConfig& cfg, const NoisePath& noise,
                                              const ForwardPath& path, const ControlField& beta);

struct ParticleResult {
    std::vector<std::vector<double>> box_average;  // [t][i]
    ForwardPath path;
};

/// n-box interacting system: each box gets its own noise draw and the
/// interaction term is the cross-box empirical average.
ParticleResult simulate_particle_system(std::size_t n_boxes, const ForwardConfig& cfg,
                                        const ControlField& control, std::uint64_t seed);

}  // namespace mfspde
