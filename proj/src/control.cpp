#include "mfspde/control.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mfspde/errors.hpp"
#include "mfspde/parallel.hpp"

namespace mfspde {

double hamiltonian(const HamiltonianInputs& in, const CoefficientSet& coeffs,
                   const LevyMeasure& levy) {
    const PointArgs a{in.t, in.x, in.y, in.ybar, in.u, in.ubar};
    const double v = hamiltonian_sensitivity(coeffs, levy, a, in.p, in.q, in.gamma).value;
    if (!std::isfinite(v)) throw DomainError("Hamiltonian is not finite at the given point");
    return v;
}

JEstimate performance(const ForwardConfig& cfg, const ForwardPath& path) {
    const std::size_t N = path.n_steps();
    const std::size_t M = path.n_scenarios();
    const std::size_t n = path.n_nodes();
    const double dt = cfg.time.dt();
    const double h = cfg.grid.h;

    JEstimate J;
    J.per_scenario.assign(M, 0.0);
    std::vector<int> bad(M, 0);
    parallel_for(M, cfg.threads, [&](std::size_t s) {
        double acc = 0.0;
        for (std::size_t t = 0; t < N; ++t) {
            const double time = cfg.time.time(t);
            const auto y = path.states[t].scenario(s);
            for (std::size_t i = 0; i < n; ++i) {
                const PointArgs a{time, cfg.grid.nodes[i], y[i], path.mean_trace[t][i],
                                  path.control.value(t, s, i), path.control_trace[t][i]};
                acc += dt * h * cfg.coeffs.f(a).value;
            }
        }
        const auto yN = path.states[N].scenario(s);
        for (std::size_t i = 0; i < n; ++i) {
            acc += h * cfg.coeffs.g(cfg.grid.nodes[i], yN[i], path.mean_trace[N][i]).value;
        }
        if (!std::isfinite(acc)) bad[s] = 1;
        J.per_scenario[s] = acc;
    });
    for (int b : bad) {
        if (b) throw DomainError("performance functional is not finite (nonpositive harvest?)");
    }
    double mean = 0.0;
    for (double v : J.per_scenario) mean += v;
    mean /= static_cast<double>(M);
    double var = 0.0;
    for (double v : J.per_scenario) var += (v - mean) * (v - mean);
    J.value = mean;
    J.std_error = M > 1 ? std::sqrt(var / static_cast<double>(M - 1) / static_cast<double>(M)) : 0.0;
    return J;
}

JEstimate evaluate_J(const ForwardConfig& cfg, const NoisePath& noise, const ControlField& control) {
    return performance(cfg, solve_forward(cfg, noise, control));
}

JEstimate evaluate_J(const ForwardConfig& cfg, const ControlField& control, std::size_t n_scenarios,
                     std::uint64_t crn_seed) {
    const auto noise = sample_noise(cfg.time, cfg.levy, n_scenarios, crn_seed, cfg.threads);
    return evaluate_J(cfg, noise, control);
}

PairedDifference paired_difference(const JEstimate& a, const JEstimate& b) {
    if (a.per_scenario.size() != b.per_scenario.size() || a.per_scenario.empty()) {
        throw InvalidArgument("paired_difference needs estimates on the same scenarios");
    }
    const std::size_t M = a.per_scenario.size();
    double mean = 0.0;
    for (std::size_t s = 0; s < M; ++s) mean += a.per_scenario[s] - b.per_scenario[s];
    mean /= static_cast<double>(M);
    double var = 0.0;
    for (std::size_t s = 0; s < M; ++s) {
        const double d = a.per_scenario[s] - b.per_scenario[s] - mean;
        var += d * d;
    }
    PairedDifference r;
    r.diff = a.value - b.value;
    r.std_error = M > 1 ? std::sqrt(var / static_cast<double>(M - 1) / static_cast<double>(M)) : 0.0;
    return r;
}

std::vector<double> project_conditional(std::span<const double> samples, std::size_t step,
                                        std::size_t node, const ForwardPath& path,
                                        const TimeGrid& time, const InfoFiltration& filt,
                                        const RegressionSpec& reg, RegressionDiagnostics* diag) {
    if (filt.delay < 0.0) throw InvalidArgument("delay must be nonnegative");
    if (step > path.n_steps() || node >= path.n_nodes()) {
        throw InvalidArgument("project_conditional: index outside the path");
    }
    if (samples.size() != path.n_scenarios()) {
        throw InvalidArgument("project_conditional: sample count mismatch");
    }
    const auto lag = static_cast<std::size_t>(std::llround(filt.delay / time.dt()));
    if (lag >= step) {
        double mean = 0.0;
        for (double v : samples) mean += v;
        mean /= static_cast<double>(samples.size());
        return std::vector<double>(samples.size(), mean);
    }
    const auto feature = path.states[step - lag].node_samples(node);
    return LocalRegressor(feature, reg, diag).project(samples);
}

std::vector<FieldEnsemble> grad_H_field(const ForwardConfig& cfg, const ForwardPath& path,
                                        const AdjointTriple& adj, const InfoFiltration& filt,
                                        const RegressionSpec& reg, RegressionDiagnostics* diag) {
    const std::size_t N = path.n_steps();
    const std::size_t M = path.n_scenarios();
    const std::size_t n = path.n_nodes();
    const std::size_t K = cfg.levy.size();
    if (adj.n_steps() != N) throw InvalidArgument("grad_H_field: adjoint/path mismatch");

    std::vector<FieldEnsemble> r(N, FieldEnsemble(M, n));
    std::vector<RegressionDiagnostics> local(N);
    for (std::size_t t = 0; t < N; ++t) {
        const double time = cfg.time.time(t);
        std::vector<double> Hu(M), Hubar(M), gamma(K), u(M), w(M);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t s = 0; s < M; ++s) {
                u[s] = path.control.value(t, s, i);
                const PointArgs a{time, cfg.grid.nodes[i], path.states[t](s, i),
                                  path.mean_trace[t][i], u[s], path.control_trace[t][i]};
                for (std::size_t k = 0; k < K; ++k) gamma[k] = adj.gamma[t][k](s, i);
                const auto h = hamiltonian_sensitivity(cfg.coeffs, cfg.levy, a, adj.p_hat[t](s, i),
                                                       adj.q[t](s, i), gamma);
                Hu[s] = h.du;
                Hubar[s] = h.dubar;
            }
            const auto cond = project_conditional(Hu, t, i, path, cfg.time, filt, reg, &local[t]);
            double mean_bar = 0.0;
            for (double v : Hubar) mean_bar += v;
            mean_bar /= static_cast<double>(M);
            cfg.G.gradient(u, w);
            for (std::size_t s = 0; s < M; ++s) r[t](s, i) = cond[s] + mean_bar * w[s];
        }
    }
    if (diag) {
        for (const auto& d : local) diag->merge(d);
    }
    return r;
}

bool clamp_active(double u, double r, double u_min, double u_max) {
    return (u <= u_min && r < 0.0) || (u >= u_max && r > 0.0);
}

// ---------------------------------------------------------------------------
// Concavity

namespace {

struct Point4 {
    double y, ybar, u, ubar;
};

double eval_H(const CoefficientSet& c, const LevyMeasure& levy, double t, double x, const Point4& z,
              const AdjointSample& a) {
    const PointArgs args{t, x, z.y, z.ybar, z.u, z.ubar};
    return hamiltonian_sensitivity(c, levy, args, a.p, a.q, a.gamma).value;
}

double eval_g(const CoefficientSet& c, double x, const Point4& z) { return c.g(x, z.y, z.ybar).value; }

}  // namespace

ConcavityVerdict check_concavity(const CoefficientSet& coeffs, const LevyMeasure& levy,
                                 const ProbeBox& box, std::span<const AdjointSample> samples,
                                 std::size_t probe_count, std::uint64_t seed) {
    if (probe_count == 0) throw InvalidArgument("probe_count must be >= 1");
    std::vector<AdjointSample> adj(samples.begin(), samples.end());
    if (adj.empty()) adj.push_back(AdjointSample{0.0, 0.0, std::vector<double>(levy.size(), 0.0)});
    for (const auto& a : adj) {
        if (a.gamma.size() != levy.size()) throw InvalidArgument("adjoint sample gamma length");
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto lerp = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    const Point4 lo{box.y_lo, box.ybar_lo, box.u_lo, box.ubar_lo};
    const Point4 hi{box.y_hi, box.ybar_hi, box.u_hi, box.ubar_hi};
    const Point4 anti1{box.y_lo, box.ybar_lo, box.u_hi, box.ubar_hi};
    const Point4 anti2{box.y_hi, box.ybar_hi, box.u_lo, box.ubar_lo};

    ConcavityVerdict v;
    auto test = [&](const Point4& a, const Point4& b, double t, double x, const AdjointSample& s) {
        const Point4 m{0.5 * (a.y + b.y), 0.5 * (a.ybar + b.ybar), 0.5 * (a.u + b.u),
                       0.5 * (a.ubar + b.ubar)};
        ++v.probes;
        auto record = [&](const char* fn, double gap) {
            v.pass = false;
            v.function = fn;
            v.y1 = a.y; v.ybar1 = a.ybar; v.u1 = a.u; v.ubar1 = a.ubar;
            v.y2 = b.y; v.ybar2 = b.ybar; v.u2 = b.u; v.ubar2 = b.ubar;
            v.p = s.p; v.q = s.q; v.gamma = s.gamma;
            v.t = t; v.x = x;
            v.gap = gap;
        };
        const double h1 = eval_H(coeffs, levy, t, x, a, s);
        const double h2 = eval_H(coeffs, levy, t, x, b, s);
        const double hm = eval_H(coeffs, levy, t, x, m, s);
        const double tol_h = 1e-10 * std::max({1.0, std::abs(h1), std::abs(h2), std::abs(hm)});
        if (0.5 * (h1 + h2) - hm > tol_h) {
            record("H", 0.5 * (h1 + h2) - hm);
            return true;
        }
        const double g1 = eval_g(coeffs, x, a);
        const double g2 = eval_g(coeffs, x, b);
        const double gm = eval_g(coeffs, x, m);
        const double tol_g = 1e-10 * std::max({1.0, std::abs(g1), std::abs(g2), std::abs(gm)});
        if (0.5 * (g1 + g2) - gm > tol_g) {
            record("g", 0.5 * (g1 + g2) - gm);
            return true;
        }
        return false;
    };

    for (const auto& s : adj) {
        if (test(lo, hi, box.t_lo, box.x_lo, s) || test(anti1, anti2, box.t_lo, box.x_lo, s)) return v;
    }
    for (std::size_t k = 0; k < probe_count; ++k) {
        const auto& s = adj[k % adj.size()];
        const Point4 a{lerp(box.y_lo, box.y_hi), lerp(box.ybar_lo, box.ybar_hi),
                       lerp(box.u_lo, box.u_hi), lerp(box.ubar_lo, box.ubar_hi)};
        const Point4 b{lerp(box.y_lo, box.y_hi), lerp(box.ybar_lo, box.ybar_hi),
                       lerp(box.u_lo, box.u_hi), lerp(box.ubar_lo, box.ubar_hi)};
        const double t = lerp(box.t_lo, box.t_hi);
        const double x = lerp(box.x_lo, box.x_hi);
        if (test(a, b, t, x, s)) return v;
    }
    return v;
}

bool witness_violates(const ConcavityVerdict& v, const CoefficientSet& coeffs,
                      const LevyMeasure& levy) {
    if (v.pass) return false;
    const Point4 a{v.y1, v.ybar1, v.u1, v.ubar1};
    const Point4 b{v.y2, v.ybar2, v.u2, v.ubar2};
    const Point4 m{0.5 * (a.y + b.y), 0.5 * (a.ybar + b.ybar), 0.5 * (a.u + b.u), 0.5 * (a.ubar + b.ubar)};
    const AdjointSample s{v.p, v.q, v.gamma};
    if (v.function == "H") {
        return 0.5 * (eval_H(coeffs, levy, v.t, v.x, a, s) + eval_H(coeffs, levy, v.t, v.x, b, s)) >
               eval_H(coeffs, levy, v.t, v.x, m, s);
    }
    return 0.5 * (eval_g(coeffs, v.x, a) + eval_g(coeffs, v.x, b)) > eval_g(coeffs, v.x, m);
}

// ---------------------------------------------------------------------------
// Maximum-principle checks

double residual_sup_rms(const std::vector<FieldEnsemble>& r, const ControlField& control,
                        double* max_abs, std::size_t* n_excluded) {
    double sup = 0.0, biggest = 0.0;
    std::size_t excluded = 0;
    for (std::size_t t = 0; t < r.size(); ++t) {
        const std::size_t M = r[t].n_scenarios();
        for (std::size_t i = 0; i < r[t].n_nodes(); ++i) {
            double acc = 0.0;
            std::size_t cnt = 0;
            for (std::size_t s = 0; s < M; ++s) {
                const double v = r[t](s, i);
                if (clamp_active(control.value(t, s, i), v, control.u_min(), control.u_max())) {
                    ++excluded;
                    continue;
                }
                acc += v * v;
                ++cnt;
                biggest = std::max(biggest, std::abs(v));
            }
            if (cnt > 0) sup = std::max(sup, std::sqrt(acc / static_cast<double>(cnt)));
        }
    }
    if (max_abs) *max_abs = biggest;
    if (n_excluded) *n_excluded = excluded;
    return sup;
}

MPReport check_necessary(const ForwardConfig& cfg, const NoisePath& noise,
                         const ControlField& control, const InfoFiltration& filt,
                         const RegressionSpec& reg) {
    const auto path = solve_forward(cfg, noise, control);
    auto adj = solve_adjoint(cfg, noise, path, reg);
    MPReport rep;
    rep.diagnostics = adj.diagnostics;
    rep.residual = grad_H_field(cfg, path, adj.triple, filt, reg, &rep.diagnostics);
    const auto J = performance(cfg, path);
    rep.J = J.value;
    rep.J_std_error = J.std_error;

    const auto& pc = path.control;
    rep.sup_residual = residual_sup_rms(rep.residual, pc, &rep.max_abs_residual, &rep.n_excluded);
    std::vector<double> scale;
    for (std::size_t t = 0; t < path.n_steps(); ++t) {
        for (std::size_t s = 0; s < path.n_scenarios(); ++s) {
            for (std::size_t i = 0; i < path.n_nodes(); ++i) {
                if (clamp_active(pc.value(t, s, i), rep.residual[t](s, i), pc.u_min(), pc.u_max())) {
                    continue;
                }
                ++rep.n_points;
                scale.push_back(std::abs(path.states[t](s, i) * adj.triple.p_hat[t](s, i)));
            }
        }
    }
    if (!scale.empty()) {
        auto mid = scale.begin() + static_cast<std::ptrdiff_t>(scale.size() / 2);
        std::nth_element(scale.begin(), mid, scale.end());
        rep.median_scale = *mid;
    }
    return rep;
}

GateauxResult gateaux_J(const ForwardConfig& cfg, const NoisePath& noise,
                        const ControlField& control, const ControlField& beta,
                        std::span<const double> z_list, const InfoFiltration& filt,
                        const RegressionSpec& reg) {
    if (z_list.empty()) throw InvalidArgument("gateaux_J needs at least one step size");
    if (control.mode() == ControlField::Mode::Feedback) {
        throw InvalidArgument("gateaux_J: base control must be realized");
    }
    const std::size_t M = noise.n_scenarios;
    for (double z : z_list) {
        if (!(z > 0.0)) throw InvalidArgument("gateaux_J: step sizes must be positive");
        for (double sgn : {1.0, -1.0}) {
            if (!perturb_control(control, beta, sgn * z, M).within_bounds()) {
                throw InvalidArgument("gateaux_J: inadmissible perturbation u + z beta");
            }
        }
    }

    GateauxResult res;
    const bool zero_dir = std::all_of(beta.values().begin(), beta.values().end(),
                                      [](double v) { return v == 0.0; });
    if (zero_dir) {
        res.central_differences.assign(z_list.size(), 0.0);
        return res;
    }
    for (double z : z_list) {
        const auto jp = evaluate_J(cfg, noise, perturb_control(control, beta, z, M));
        const auto jm = evaluate_J(cfg, noise, perturb_control(control, beta, -z, M));
        res.central_differences.push_back((jp.value - jm.value) / (2.0 * z));
    }
    if (z_list.size() == 1) {
        res.fd_derivative = res.central_differences[0];
    } else {
        const std::size_t m = z_list.size();
        const double r = z_list[m - 2] / z_list[m - 1];
        const double d1 = res.central_differences[m - 2];
        const double d2 = res.central_differences[m - 1];
        res.fd_derivative = (d2 * r * r - d1) / (r * r - 1.0);
    }

    const auto path = solve_forward(cfg, noise, control);
    const auto adj = solve_adjoint(cfg, noise, path, reg);
    const auto r = grad_H_field(cfg, path, adj.triple, filt, reg);
    const double w = cfg.time.dt() * cfg.grid.h / static_cast<double>(M);
    double acc = 0.0;
    for (std::size_t t = 0; t < path.n_steps(); ++t) {
        for (std::size_t s = 0; s < M; ++s) {
            for (std::size_t i = 0; i < path.n_nodes(); ++i) acc += r[t](s, i) * beta.value(t, s, i);
        }
    }
    res.pairing_value = w * acc;
    return res;
}

AscentResult gradient_ascent(const ForwardConfig& cfg, const NoisePath& noise,
                             const ControlField& u0, std::size_t steps, double eta,
                             const InfoFiltration& filt, const RegressionSpec& reg) {
    if (eta < 0.0) throw InvalidArgument("eta must be nonnegative");
    if (u0.mode() == ControlField::Mode::Feedback) {
        throw InvalidArgument("gradient_ascent: start from a realized control");
    }
    const std::size_t M = noise.n_scenarios;
    AscentResult res;
    ControlField u = u0;
    for (std::size_t k = 0;; ++k) {
        const auto path = solve_forward(cfg, noise, u);
        const auto adj = solve_adjoint(cfg, noise, path, reg);
        auto r = grad_H_field(cfg, path, adj.triple, filt, reg);
        res.J_trace.push_back(performance(cfg, path).value);
        const double sup = residual_sup_rms(r, u);
        res.residual_trace.push_back(sup);
        if (k == steps) {
            res.residual = std::move(r);
            break;
        }
        if (eta == 0.0) continue;
        auto next = u.as_adapted(M);
        std::vector<double> v = next.values();
        const std::size_t n = u.n_nodes();
        for (std::size_t t = 0; t < u.n_steps(); ++t) {
            for (std::size_t s = 0; s < M; ++s) {
                for (std::size_t i = 0; i < n; ++i) {
                    auto& val = v[(t * M + s) * n + i];
                    val = std::clamp(val + eta * r[t](s, i), u.u_min(), u.u_max());
                }
            }
        }
        u = ControlField::adapted(u.n_steps(), M, n, std::move(v), u.u_min(), u.u_max());
    }
    res.control = u;
    return res;
}

}  // namespace mfspde
