#include "mfspde/forward.hpp"

#include <algorithm>
#include <cmath>

#include "mfspde/errors.hpp"
#include "mfspde/parallel.hpp"

namespace mfspde {

// ---------------------------------------------------------------------------
// ControlField

ControlField ControlField::constant(std::size_t n_steps, std::size_t n_nodes, double value,
                                    double u_min, double u_max) {
    return deterministic(n_steps, n_nodes, std::vector<double>(n_steps * n_nodes, value), u_min,
                         u_max);
}

ControlField ControlField::deterministic(std::size_t n_steps, std::size_t n_nodes,
                                         std::vector<double> values, double u_min, double u_max) {
    if (values.size() != n_steps * n_nodes) throw InvalidArgument("control grid size mismatch");
    if (!(u_min <= u_max)) throw InvalidArgument("control bounds must satisfy u_min <= u_max");
    ControlField c;
    c.mode_ = Mode::Deterministic;
    c.n_steps_ = n_steps;
    c.n_nodes_ = n_nodes;
    c.u_min_ = u_min;
    c.u_max_ = u_max;
    c.values_ = std::move(values);
    return c;
}

ControlField ControlField::adapted(std::size_t n_steps, std::size_t n_scenarios,
                                   std::size_t n_nodes, std::vector<double> values, double u_min,
                                   double u_max) {
    if (values.size() != n_steps * n_scenarios * n_nodes) {
        throw InvalidArgument("adapted control size mismatch");
    }
    if (!(u_min <= u_max)) throw InvalidArgument("control bounds must satisfy u_min <= u_max");
    ControlField c;
    c.mode_ = Mode::Adapted;
    c.n_steps_ = n_steps;
    c.n_scenarios_ = n_scenarios;
    c.n_nodes_ = n_nodes;
    c.u_min_ = u_min;
    c.u_max_ = u_max;
    c.values_ = std::move(values);
    return c;
}

ControlField ControlField::feedback(std::size_t n_steps, std::size_t n_nodes, FeedbackFn fn,
                                    double u_min, double u_max) {
    if (!fn) throw InvalidArgument("feedback control requires a map");
    if (!(u_min <= u_max)) throw InvalidArgument("control bounds must satisfy u_min <= u_max");
    ControlField c;
    c.mode_ = Mode::Feedback;
    c.n_steps_ = n_steps;
    c.n_nodes_ = n_nodes;
    c.u_min_ = u_min;
    c.u_max_ = u_max;
    c.feedback_ = std::move(fn);
    return c;
}

bool ControlField::within_bounds() const {
    return std::all_of(values_.begin(), values_.end(),
                       [&](double v) { return v >= u_min_ && v <= u_max_; });
}

ControlField ControlField::clamped() const {
    ControlField c = *this;
    for (auto& v : c.values_) v = std::clamp(v, u_min_, u_max_);
    return c;
}

ControlField ControlField::as_adapted(std::size_t n_scenarios) const {
    if (mode_ == Mode::Adapted) {
        if (n_scenarios != n_scenarios_) throw InvalidArgument("scenario count mismatch");
        return *this;
    }
    if (mode_ == Mode::Feedback) throw InvalidArgument("feedback control has no stored values");
    std::vector<double> v(n_steps_ * n_scenarios * n_nodes_);
    for (std::size_t t = 0; t < n_steps_; ++t) {
        for (std::size_t s = 0; s < n_scenarios; ++s) {
            for (std::size_t i = 0; i < n_nodes_; ++i) {
                v[(t * n_scenarios + s) * n_nodes_ + i] = values_[t * n_nodes_ + i];
            }
        }
    }
    return adapted(n_steps_, n_scenarios, n_nodes_, std::move(v), u_min_, u_max_);
}

ControlField perturb_control(const ControlField& base, const ControlField& direction, double z,
                             std::size_t n_scenarios) {
    if (base.mode() == ControlField::Mode::Feedback ||
        direction.mode() == ControlField::Mode::Feedback) {
        throw InvalidArgument("perturb_control: feedback controls must be realized first");
    }
    if (base.n_steps() != direction.n_steps() || base.n_nodes() != direction.n_nodes()) {
        throw InvalidArgument("perturb_control: shape mismatch");
    }
    if (base.mode() == ControlField::Mode::Deterministic &&
        direction.mode() == ControlField::Mode::Deterministic) {
        std::vector<double> v(base.values().size());
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = base.values()[k] + z * direction.values()[k];
        return ControlField::deterministic(base.n_steps(), base.n_nodes(), std::move(v), base.u_min(),
                                           base.u_max());
    }
    const auto a = base.as_adapted(n_scenarios);
    const auto d = direction.as_adapted(n_scenarios);
    std::vector<double> v(a.values().size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = a.values()[k] + z * d.values()[k];
    return ControlField::adapted(a.n_steps(), n_scenarios, a.n_nodes(), std::move(v), a.u_min(),
                                 a.u_max());
}

// ---------------------------------------------------------------------------
// Forward stepping

namespace {

void validate(const ForwardConfig& cfg, const NoisePath& noise, const ControlField& control) {
    const std::size_t n = cfg.grid.n_interior;
    if (cfg.op.size() != n) throw InvalidArgument("operator does not match grid");
    if (cfg.initial.size() != n) throw InvalidArgument("initial field does not match grid");
    if (noise.n_steps() != cfg.time.n_steps || noise.time.T != cfg.time.T) {
        throw InvalidArgument("noise path does not match the time grid");
    }
    if (noise.n_marks() != cfg.levy.size()) {
        throw InvalidArgument("noise path does not match the Levy measure");
    }
    if (control.n_steps() != cfg.time.n_steps || control.n_nodes() != n) {
        throw InvalidArgument("control does not match the grid");
    }
    if (control.mode() == ControlField::Mode::Adapted && control.n_scenarios() != noise.n_scenarios) {
        throw InvalidArgument("adapted control does not match the scenario count");
    }
    if (control.mode() != ControlField::Mode::Feedback && !control.within_bounds()) {
        throw InvalidArgument("control values outside [u_min, u_max]");
    }
}

struct StepWork {
    const ForwardConfig& cfg;
    const NoisePath& noise;
    const ImplicitSolver& solver;
};

/// Advances every scenario one step. ybar and ubar are per-node mean-field values.
FieldEnsemble advance(const StepWork& w, const FieldEnsemble& state, std::size_t step,
                      std::span<const double> control_values, std::span<const double> ybar,
                      std::span<const double> ubar, std::size_t& floor_hits) {
    const auto& cfg = w.cfg;
    const std::size_t M = state.n_scenarios();
    const std::size_t n = state.n_nodes();
    const std::size_t K = cfg.levy.size();
    const double dt = cfg.time.dt();
    const double t = cfg.time.time(step);
    const double t_next = cfg.time.time(step + 1);
    const double eps = cfg.coeffs.positivity_floor;
    const double eta_left = cfg.coeffs.eta(t_next, cfg.grid.x_min);
    const double eta_right = cfg.coeffs.eta(t_next, cfg.grid.x_max);

    FieldEnsemble next(M, n);
    std::vector<std::size_t> hits(M, 0);
    std::vector<int> bad(M, 0);

    parallel_for(M, cfg.threads, [&](std::size_t s) {
        auto out = next.scenario(s);
        const auto y = state.scenario(s);
        const double dW = w.noise.brownian(s, step);
        for (std::size_t i = 0; i < n; ++i) {
            PointArgs a{t, cfg.grid.nodes[i], y[i], ybar[i], control_values[s * n + i], ubar[i]};
            const double drift = cfg.coeffs.b(a).value;
            double incr = cfg.coeffs.sigma(a).value * dW;
            for (std::size_t k = 0; k < K; ++k) {
                incr += cfg.coeffs.theta(a, cfg.levy.marks[k]).value * w.noise.compensated(s, step, k);
            }
            double noise_part = y[i] + incr;
            double rhs;
            if (cfg.coeffs.positivity) {
                // multiplicative factor max(1 + incr / y, eps)
                if (noise_part < eps * y[i]) {
                    noise_part = eps * y[i];
                    ++hits[s];
                }
                rhs = noise_part + dt * drift;
                if (rhs < eps) {
                    rhs = eps;
                    ++hits[s];
                }
            } else {
                rhs = noise_part + dt * drift;
            }
            out[i] = rhs;
        }
        out[0] += dt * cfg.op.lower[0] * eta_left;
        out[n - 1] += dt * cfg.op.upper[n - 1] * eta_right;
        w.solver.solve(out);
        for (std::size_t i = 0; i < n; ++i) {
            if (cfg.coeffs.positivity && out[i] < eps) {
                out[i] = eps;
                ++hits[s];
            }
            if (!std::isfinite(out[i])) bad[s] = 1;
        }
    });

    for (std::size_t s = 0; s < M; ++s) {
        if (bad[s]) throw NumericalError("non-finite state in forward step");
        floor_hits += hits[s];
    }
    return next;
}

/// Control values at one step as a (scenario, node) slice; feedback controls
/// are evaluated on the current state and clamped.
std::vector<double> control_slice(const ForwardConfig& cfg, const ControlField& control,
                                  const FieldEnsemble& state, std::size_t step) {
    const std::size_t M = state.n_scenarios();
    const std::size_t n = state.n_nodes();
    std::vector<double> out(M * n);
    const double t = cfg.time.time(step);
    for (std::size_t s = 0; s < M; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
            if (control.mode() == ControlField::Mode::Feedback) {
                const double v = control.feedback_fn()(step, i, t, cfg.grid.nodes[i], state(s, i));
                out[s * n + i] = std::clamp(v, control.u_min(), control.u_max());
            } else {
                out[s * n + i] = control.value(step, s, i);
            }
        }
    }
    return out;
}

std::vector<double> node_meanfield(const MeanFieldOperator& op, std::span<const double> slice,
                                   std::size_t M, std::size_t n) {
    std::vector<double> out(n);
    std::vector<double> column(M);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t s = 0; s < M; ++s) column[s] = slice[s * n + i];
        out[i] = op.apply(column);
    }
    return out;
}

ForwardPath run_forward(const ForwardConfig& cfg, const NoisePath& noise, const ControlField& control,
                        const std::vector<std::vector<double>>* frozen) {
    validate(cfg, noise, control);
    const std::size_t M = noise.n_scenarios;
    const std::size_t n = cfg.grid.n_interior;
    const std::size_t N = cfg.time.n_steps;
    if (frozen && frozen->size() < N) throw InvalidArgument("frozen trace too short");

    const ImplicitSolver solver(cfg.op, cfg.time.dt());
    const StepWork work{cfg, noise, solver};

    ForwardPath path;
    path.states.reserve(N + 1);
    FieldEnsemble y0(M, n);
    for (std::size_t s = 0; s < M; ++s) {
        for (std::size_t i = 0; i < n; ++i) y0(s, i) = cfg.initial[i];
    }
    path.states.push_back(std::move(y0));
    path.mean_trace.push_back(node_meanfield(cfg.F, path.states[0].values(), M, n));

    const bool realize = control.mode() == ControlField::Mode::Feedback;
    std::vector<double> realized;
    if (realize) realized.resize(N * M * n);

    for (std::size_t t = 0; t < N; ++t) {
        const auto& state = path.states.back();
        const auto u = control_slice(cfg, control, state, t);
        if (realize) std::copy(u.begin(), u.end(), realized.begin() + t * M * n);
        auto ubar = node_meanfield(cfg.G, u, M, n);
        std::span<const double> ybar = frozen ? std::span<const double>((*frozen)[t])
                                              : std::span<const double>(path.mean_trace.back());
        auto next = advance(work, state, t, u, ybar, ubar, path.floor_hits);
        path.control_trace.push_back(std::move(ubar));
        path.mean_trace.push_back(node_meanfield(cfg.F, next.values(), M, n));
        path.states.push_back(std::move(next));
    }

    if (cfg.coeffs.positivity) {
        const double fraction =
            static_cast<double>(path.floor_hits) / static_cast<double>(M * n * N);
        if (fraction > cfg.max_floor_fraction) {
            throw NumericalError("positivity violation: floor hit in " + std::to_string(fraction * 100.0) +
                                 "% of cell updates");
        }
    }
    path.control = realize ? ControlField::adapted(N, M, n, std::move(realized), control.u_min(),
                                                   control.u_max())
                           : control;
    return path;
}

}  // namespace

FieldEnsemble step_forward(const FieldEnsemble& state, std::size_t step, const ForwardConfig& cfg,
                           std::span<const double> control_values, const NoisePath& noise,
                           std::span<const double> frozen_ybar, std::size_t* floor_hits) {
    const std::size_t M = state.n_scenarios();
    const std::size_t n = state.n_nodes();
    if (control_values.size() != M * n) throw InvalidArgument("control slice size mismatch");
    if (step >= cfg.time.n_steps) throw InvalidArgument("step outside the time grid");
    const ImplicitSolver solver(cfg.op, cfg.time.dt());
    const StepWork work{cfg, noise, solver};
    const auto ybar = frozen_ybar.empty() ? node_meanfield(cfg.F, state.values(), M, n)
                                          : std::vector<double>(frozen_ybar.begin(), frozen_ybar.end());
    const auto ubar = node_meanfield(cfg.G, control_values, M, n);
    std::size_t hits = 0;
    auto next = advance(work, state, step, control_values, ybar, ubar, hits);
    if (floor_hits) *floor_hits += hits;
    return next;
}

ForwardPath solve_forward(const ForwardConfig& cfg, const NoisePath& noise,
                          const ControlField& control) {
    return run_forward(cfg, noise, control, nullptr);
}

ForwardPath solve_forward_frozen(const ForwardConfig& cfg, const NoisePath& noise,
                                 const ControlField& control,
                                 const std::vector<std::vector<double>>& frozen_trace) {
    return run_forward(cfg, noise, control, &frozen_trace);
}

double path_distance_sup_H(const SpatialGrid& grid, const std::vector<FieldEnsemble>& a,
                           const std::vector<FieldEnsemble>& b) {
    if (a.size() != b.size() || a.empty()) throw InvalidArgument("path length mismatch");
    const std::size_t M = a[0].n_scenarios();
    double total = 0.0;
    for (std::size_t s = 0; s < M; ++s) {
        double sup = 0.0;
        for (std::size_t t = 0; t < a.size(); ++t) {
            const auto ua = a[t].scenario(s);
            const auto ub = b[t].scenario(s);
            double acc = 0.0;
            for (std::size_t i = 0; i < ua.size(); ++i) acc += (ua[i] - ub[i]) * (ua[i] - ub[i]);
            sup = std::max(sup, grid.h * acc);
        }
        total += sup;
    }
    return total / static_cast<double>(M);
}

PicardForwardResult picard_forward(const ForwardConfig& cfg, const NoisePath& noise,
                                   const ControlField& control, std::size_t n_iters) {
    if (n_iters < 2) throw InvalidArgument("picard_forward needs n_iters >= 2");
    const std::size_t N = cfg.time.n_steps;
    const std::size_t n = cfg.grid.n_interior;
    const std::size_t M = noise.n_scenarios;

    // Y^0 = xi at every time level.
    std::vector<FieldEnsemble> prev_states;
    {
        FieldEnsemble xi(M, n);
        for (std::size_t s = 0; s < M; ++s) {
            for (std::size_t i = 0; i < n; ++i) xi(s, i) = cfg.initial[i];
        }
        prev_states.assign(N + 1, xi);
    }
    std::vector<std::vector<double>> trace(N + 1, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto col = prev_states[0].node_samples(i);
        trace[0][i] = cfg.F.apply(col);
    }
    for (std::size_t t = 1; t <= N; ++t) trace[t] = trace[0];

    PicardForwardResult result;
    // Y^1 from the constant trace, then d_n compares Y^{n+1} with Y^n.
    ForwardPath current = solve_forward_frozen(cfg, noise, control, trace);
    for (std::size_t k = 1; k <= n_iters; ++k) {
        ForwardPath next = solve_forward_frozen(cfg, noise, control, current.mean_trace);
        result.distances.push_back(path_distance_sup_H(cfg.grid, next.states, current.states));
        current = std::move(next);
    }
    const ForwardPath direct = solve_forward(cfg, noise, control);
    result.distance_to_fixed_point = path_distance_sup_H(cfg.grid, current.states, direct.states);

    // Decay diagnostics on the part of the sequence above round-off.
    const double floor = 1e-26 * std::max(1.0, result.distances.front());
    std::vector<double> logs;
    for (double d : result.distances) {
        if (d <= floor) break;
        logs.push_back(std::log(d));
    }
    for (std::size_t k = 0; k + 1 < logs.size(); ++k) result.decay_rates.push_back(logs[k] - logs[k + 1]);
    result.decay_accelerating = result.decay_rates.size() >= 2;
    for (std::size_t k = 1; k < result.decay_rates.size(); ++k) {
        if (!(result.decay_rates[k] > result.decay_rates[k - 1])) result.decay_accelerating = false;
    }
    if (logs.size() >= 2) {
        // regress log d_n on log(n!)
        std::vector<double> xs(logs.size());
        double lf = 0.0;
        for (std::size_t k = 0; k < logs.size(); ++k) {
            lf += std::log(static_cast<double>(k + 1));
            xs[k] = lf;
        }
        double mx = 0.0, my = 0.0;
        for (std::size_t k = 0; k < logs.size(); ++k) {
            mx += xs[k];
            my += logs[k];
        }
        mx /= static_cast<double>(logs.size());
        my /= static_cast<double>(logs.size());
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t k = 0; k < logs.size(); ++k) {
            sxy += (xs[k] - mx) * (logs[k] - my);
            sxx += (xs[k] - mx) * (xs[k] - mx);
        }
        result.factorial_slope = sxx > 0.0 ? sxy / sxx : 0.0;
    }
    return result;
}

std::vector<FieldEnsemble> derivative_process(const ForwardConfig& cfg, const NoisePath& noise,
                                              const ForwardPath& path, const ControlField& beta) {
    const std::size_t M = path.n_scenarios();
    const std::size_t n = path.n_nodes();
    const std::size_t N = path.n_steps();
    const std::size_t K = cfg.levy.size();
    if (N != cfg.time.n_steps || beta.n_steps() != N || beta.n_nodes() != n) {
        throw InvalidArgument("derivative_process: shape mismatch");
    }
    if (beta.mode() == ControlField::Mode::Feedback) {
        throw InvalidArgument("derivative_process: direction must be realized");
    }
    const double dt = cfg.time.dt();
    const ImplicitSolver solver(cfg.op, dt);

    std::vector<FieldEnsemble> out;
    out.reserve(N + 1);
    out.emplace_back(M, n, 0.0);

    std::vector<double> column(M), weights(M);
    for (std::size_t t = 0; t < N; ++t) {
        const double time = cfg.time.time(t);
        const auto& Y = path.states[t];
        const auto& D = out.back();
        // <grad F(Y), D> and <grad G(u), beta> per node
        std::vector<double> pair_F(n), pair_G(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t s = 0; s < M; ++s) column[s] = Y(s, i);
            cfg.F.gradient(column, weights);
            double acc = 0.0;
            for (std::size_t s = 0; s < M; ++s) acc += weights[s] * D(s, i);
            pair_F[i] = acc / static_cast<double>(M);

            for (std::size_t s = 0; s < M; ++s) column[s] = path.control.value(t, s, i);
            cfg.G.gradient(column, weights);
            acc = 0.0;
            for (std::size_t s = 0; s < M; ++s) acc += weights[s] * beta.value(t, s, i);
            pair_G[i] = acc / static_cast<double>(M);
        }

        FieldEnsemble next(M, n);
        parallel_for(M, cfg.threads, [&](std::size_t s) {
            auto row = next.scenario(s);
            const double dW = noise.brownian(s, t);
            for (std::size_t i = 0; i < n; ++i) {
                const PointArgs a{time, cfg.grid.nodes[i], Y(s, i), path.mean_trace[t][i],
                                  path.control.value(t, s, i), path.control_trace[t][i]};
                const double d = D(s, i);
                const double bt = beta.value(t, s, i);
                auto lin = [&](const Sensitivity& c) {
                    return c.dy * d + c.dybar * pair_F[i] + c.du * bt + c.dubar * pair_G[i];
                };
                double v = d + dt * lin(cfg.coeffs.b(a)) + lin(cfg.coeffs.sigma(a)) * dW;
                for (std::size_t k = 0; k < K; ++k) {
                    v += lin(cfg.coeffs.theta(a, cfg.levy.marks[k])) * noise.compensated(s, t, k);
                }
                row[i] = v;
            }
            solver.solve(row);
        });
        out.push_back(std::move(next));
    }
    return out;
}

ParticleResult simulate_particle_system(std::size_t n_boxes, const ForwardConfig& cfg,
                                        const ControlField& control, std::uint64_t seed) {
    if (n_boxes == 0) throw InvalidArgument("n_boxes must be >= 1");
    ForwardConfig box_cfg = cfg;
    box_cfg.F = MeanFieldOperator::expectation();
    const auto noise = sample_noise(cfg.time, cfg.levy, n_boxes, seed, cfg.threads);
    ParticleResult r;
    r.path = solve_forward(box_cfg, noise, control);
    r.box_average.reserve(r.path.states.size());
    for (const auto& st : r.path.states) {
        std::vector<double> avg(st.n_nodes());
        for (std::size_t i = 0; i < st.n_nodes(); ++i) avg[i] = st.node_mean(i);
        r.box_average.push_back(std::move(avg));
    }
    return r;
}

}  // namespace mfspde
