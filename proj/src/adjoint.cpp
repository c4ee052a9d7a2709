#include "mfspde/adjoint.hpp"

#include <cmath>

#include "mfspde/errors.hpp"
#include "mfspde/parallel.hpp"

namespace mfspde {

Sensitivity hamiltonian_sensitivity(const CoefficientSet& coeffs, const LevyMeasure& levy,
                                    const PointArgs& a, double p, double q,
                                    std::span<const double> gamma) {
    if (gamma.size() != levy.size()) throw InvalidArgument("gamma length must equal mark count");
    Sensitivity h = coeffs.f(a);
    auto add = [&h](const Sensitivity& c, double w) {
        h.value += w * c.value;
        h.dy += w * c.dy;
        h.dybar += w * c.dybar;
        h.du += w * c.du;
        h.dubar += w * c.dubar;
    };
    add(coeffs.b(a), p);
    add(coeffs.sigma(a), q);
    for (std::size_t k = 0; k < levy.size(); ++k) {
        add(coeffs.theta(a, levy.marks[k]), gamma[k] * levy.intensities[k]);
    }
    return h;
}

FieldEnsemble terminal_condition(const ForwardConfig& cfg, const ForwardPath& path) {
    if (path.states.empty()) throw InvalidArgument("terminal_condition: empty path");
    const auto& Y = path.states.back();
    const std::size_t M = Y.n_scenarios();
    const std::size_t n = Y.n_nodes();
    FieldEnsemble p(M, n);
    std::vector<double> w(M);
    for (std::size_t i = 0; i < n; ++i) {
        const auto col = Y.node_samples(i);
        const double ybar = path.mean_trace.back()[i];
        const double x = cfg.grid.nodes[i];
        cfg.F.gradient(col, w);
        double mean_gbar = 0.0;
        for (std::size_t s = 0; s < M; ++s) mean_gbar += cfg.coeffs.g(x, col[s], ybar).dybar;
        mean_gbar /= static_cast<double>(M);
        for (std::size_t s = 0; s < M; ++s) {
            p(s, i) = cfg.coeffs.g(x, col[s], ybar).dy + mean_gbar * w[s];
        }
    }
    return p;
}

AdjointResult solve_adjoint(const ForwardConfig& cfg, const NoisePath& noise,
                            const ForwardPath& path, const RegressionSpec& reg) {
    const std::size_t N = path.n_steps();
    const std::size_t M = path.n_scenarios();
    const std::size_t n = path.n_nodes();
    const std::size_t K = cfg.levy.size();
    if (N != cfg.time.n_steps || noise.n_steps() != N || noise.n_scenarios != M) {
        throw InvalidArgument("solve_adjoint: path and noise layouts differ");
    }
    const double dt = cfg.time.dt();
    const ImplicitSolver solver(adjoint_operator(cfg.op), dt);

    AdjointResult out;
    auto& tr = out.triple;
    tr.p.assign(N + 1, FieldEnsemble());
    tr.p_hat.assign(N, FieldEnsemble());
    tr.q.assign(N, FieldEnsemble());
    tr.gamma.assign(N, std::vector<FieldEnsemble>(K));
    tr.p[N] = terminal_condition(cfg, path);

    for (std::size_t t = N; t-- > 0;) {
        const auto& Y = path.states[t];
        FieldEnsemble R = tr.p[t + 1];
        parallel_for(M, cfg.threads, [&](std::size_t s) { solver.solve(R.scenario(s)); });

        FieldEnsemble phat(M, n), q(M, n);
        std::vector<FieldEnsemble> gam(K, FieldEnsemble(M, n));
        std::vector<RegressionDiagnostics> diag(n);
        parallel_for(n, cfg.threads, [&](std::size_t i) {
            const auto feature = Y.node_samples(i);
            const LocalRegressor reg_i(feature, reg, &diag[i]);
            std::vector<double> target(M), fitted(M);
            for (std::size_t s = 0; s < M; ++s) target[s] = R(s, i);
            reg_i.project(target, fitted);
            phat.set_node_samples(i, fitted);
            for (std::size_t s = 0; s < M; ++s) target[s] = R(s, i) * noise.brownian(s, t);
            reg_i.project(target, fitted);
            for (std::size_t s = 0; s < M; ++s) q(s, i) = fitted[s] / dt;
            for (std::size_t k = 0; k < K; ++k) {
                for (std::size_t s = 0; s < M; ++s) target[s] = R(s, i) * noise.compensated(s, t, k);
                reg_i.project(target, fitted);
                const double scale = cfg.levy.intensities[k] * dt;
                for (std::size_t s = 0; s < M; ++s) gam[k](s, i) = fitted[s] / scale;
            }
        });
        for (const auto& d : diag) out.diagnostics.merge(d);

        // driver
        const double time = cfg.time.time(t);
        FieldEnsemble Hy(M, n), Hybar(M, n);
        std::vector<int> bad(M, 0);
        parallel_for(M, cfg.threads, [&](std::size_t s) {
            std::vector<double> g(K);
            for (std::size_t i = 0; i < n; ++i) {
                const PointArgs a{time, cfg.grid.nodes[i], Y(s, i), path.mean_trace[t][i],
                                  path.control.value(t, s, i), path.control_trace[t][i]};
                for (std::size_t k = 0; k < K; ++k) g[k] = gam[k](s, i);
                const auto h = hamiltonian_sensitivity(cfg.coeffs, cfg.levy, a, phat(s, i), q(s, i), g);
                Hy(s, i) = h.dy;
                Hybar(s, i) = h.dybar;
                if (!std::isfinite(h.dy) || !std::isfinite(h.dybar)) bad[s] = 1;
            }
        });
        for (int b : bad) {
            if (b) throw NumericalError("non-finite adjoint driver");
        }

        FieldEnsemble p(M, n);
        std::vector<double> w(M);
        for (std::size_t i = 0; i < n; ++i) {
            cfg.F.gradient(Y.node_samples(i), w);
            const double mean_bar = Hybar.node_mean(i);
            for (std::size_t s = 0; s < M; ++s) {
                p(s, i) = phat(s, i) + dt * (Hy(s, i) + mean_bar * w[s]);
            }
        }
        tr.p[t] = std::move(p);
        tr.p_hat[t] = std::move(phat);
        tr.q[t] = std::move(q);
        tr.gamma[t] = std::move(gam);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Standalone backward equation

BackwardGenerator lipschitz_meanfield_generator(const LevyMeasure& levy) {
    BackwardGenerator g;
    const auto nu = levy.intensities;
    g.f = [nu](double, double, double y, double ybar, double z, double zbar,
               std::span<const double> u, std::span<const double> ubar) {
        double ju = 0.0, jk = 0.0;
        for (std::size_t k = 0; k < nu.size(); ++k) {
            ju += nu[k] * u[k];
            jk += nu[k] * ubar[k];
        }
        return -0.5 * y + 0.8 * std::sin(ybar) + 0.3 * z + 0.5 * std::tanh(zbar) + 0.2 * ju + 0.4 * jk;
    };
    g.H = MeanFieldOperator::expectation();
    g.J = MeanFieldOperator::scaled(0.5);
    g.K = MeanFieldOperator::expectation();
    return g;
}

BackwardGenerator local_generator(const LevyMeasure& levy) {
    BackwardGenerator g;
    const auto nu = levy.intensities;
    g.f = [nu](double, double, double y, double, double z, double, std::span<const double> u,
               std::span<const double>) {
        double ju = 0.0;
        for (std::size_t k = 0; k < nu.size(); ++k) ju += nu[k] * u[k];
        return -0.5 * y + 0.3 * z + 0.2 * ju;
    };
    return g;
}

namespace {

BackwardIterate zero_iterate(std::size_t N, std::size_t M, std::size_t n, std::size_t K) {
    BackwardIterate it;
    it.Y.assign(N + 1, FieldEnsemble(M, n));
    it.Z.assign(N, FieldEnsemble(M, n));
    it.U.assign(N, std::vector<FieldEnsemble>(K, FieldEnsemble(M, n)));
    return it;
}

std::vector<double> node_apply(const MeanFieldOperator& op, const FieldEnsemble& e) {
    std::vector<double> out(e.n_nodes());
    for (std::size_t i = 0; i < e.n_nodes(); ++i) out[i] = op.apply(e.node_samples(i));
    return out;
}

double mean_sq_H(const SpatialGrid& grid, const FieldEnsemble& a, const FieldEnsemble& b) {
    double acc = 0.0;
    const auto& va = a.values();
    const auto& vb = b.values();
    for (std::size_t k = 0; k < va.size(); ++k) acc += (va[k] - vb[k]) * (va[k] - vb[k]);
    return grid.h * acc / static_cast<double>(a.n_scenarios());
}

}  // namespace

PicardBackwardResult picard_backward(const ForwardConfig& cfg, const NoisePath& noise,
                                     const ForwardPath& path, const FieldEnsemble& xi,
                                     const BackwardGenerator& gen, const RegressionSpec& reg,
                                     std::size_t n_iters, double weight) {
    if (n_iters < 2) throw InvalidArgument("picard_backward needs n_iters >= 2");
    if (!gen.f) throw InvalidArgument("picard_backward needs a generator");
    const std::size_t N = path.n_steps();
    const std::size_t M = path.n_scenarios();
    const std::size_t n = path.n_nodes();
    const std::size_t K = cfg.levy.size();
    if (xi.n_scenarios() != M || xi.n_nodes() != n) throw InvalidArgument("xi shape mismatch");
    if (noise.n_steps() != N || noise.n_scenarios != M) {
        throw InvalidArgument("picard_backward: path and noise layouts differ");
    }
    const double dt = cfg.time.dt();
    const ImplicitSolver solver(cfg.op, dt);

    // Regressors depend only on the forward path: build them once.
    std::vector<std::vector<LocalRegressor>> regs(N);
    PicardBackwardResult result;
    for (std::size_t t = 0; t < N; ++t) {
        regs[t].reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            regs[t].emplace_back(path.states[t].node_samples(i), reg, &result.diagnostics);
        }
    }

    auto iterate = [&](const BackwardIterate& prev) {
        BackwardIterate cur = zero_iterate(N, M, n, K);
        cur.Y[N] = xi;
        for (std::size_t t = N; t-- > 0;) {
            const auto Hbar = node_apply(gen.H, prev.Y[t]);
            const auto Jbar = node_apply(gen.J, prev.Z[t]);
            std::vector<std::vector<double>> Kbar(K);
            for (std::size_t k = 0; k < K; ++k) Kbar[k] = node_apply(gen.K, prev.U[t][k]);

            const auto& next = cur.Y[t + 1];
            FieldEnsemble yhat(M, n);
            auto& Z = cur.Z[t];
            auto& U = cur.U[t];
            parallel_for(n, cfg.threads, [&](std::size_t i) {
                std::vector<double> target(M), fitted(M);
                for (std::size_t s = 0; s < M; ++s) target[s] = next(s, i);
                regs[t][i].project(target, fitted);
                yhat.set_node_samples(i, fitted);
                for (std::size_t s = 0; s < M; ++s) target[s] = next(s, i) * noise.brownian(s, t);
                regs[t][i].project(target, fitted);
                for (std::size_t s = 0; s < M; ++s) Z(s, i) = fitted[s] / dt;
                for (std::size_t k = 0; k < K; ++k) {
                    for (std::size_t s = 0; s < M; ++s) {
                        target[s] = next(s, i) * noise.compensated(s, t, k);
                    }
                    regs[t][i].project(target, fitted);
                    const double scale = cfg.levy.intensities[k] * dt;
                    for (std::size_t s = 0; s < M; ++s) U[k](s, i) = fitted[s] / scale;
                }
            });

            const double time = cfg.time.time(t);
            FieldEnsemble Y(M, n);
            parallel_for(M, cfg.threads, [&](std::size_t s) {
                std::vector<double> u(K), kb(K);
                auto row = Y.scenario(s);
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t k = 0; k < K; ++k) {
                        u[k] = U[k](s, i);
                        kb[k] = Kbar[k][i];
                    }
                    const double f = gen.f(time, cfg.grid.nodes[i], yhat(s, i), Hbar[i], Z(s, i),
                                           Jbar[i], u, kb);
                    row[i] = yhat(s, i) - dt * f;
                }
                solver.solve(row);
            });
            for (double v : Y.values()) {
                if (!std::isfinite(v)) throw NumericalError("non-finite backward iterate");
            }
            cur.Y[t] = std::move(Y);
        }
        return cur;
    };

    auto distance = [&](const BackwardIterate& a, const BackwardIterate& b) {
        double acc = 0.0;
        for (std::size_t t = 0; t < N; ++t) {
            double term = mean_sq_H(cfg.grid, a.Y[t], b.Y[t]) + mean_sq_H(cfg.grid, a.Z[t], b.Z[t]);
            for (std::size_t k = 0; k < K; ++k) {
                term += cfg.levy.intensities[k] * mean_sq_H(cfg.grid, a.U[t][k], b.U[t][k]);
            }
            acc += dt * std::exp(weight * cfg.time.time(t)) * term;
        }
        return acc;
    };

    BackwardIterate prev = iterate(zero_iterate(N, M, n, K));
    for (std::size_t k = 1; k <= n_iters; ++k) {
        BackwardIterate cur = iterate(prev);
        result.distances.push_back(distance(cur, prev));
        prev = std::move(cur);
    }
    for (std::size_t k = 0; k + 1 < result.distances.size(); ++k) {
        const double d = result.distances[k];
        result.ratios.push_back(d > 0.0 ? result.distances[k + 1] / d : 0.0);
    }
    result.last = std::move(prev);
    return result;
}

}  // namespace mfspde
