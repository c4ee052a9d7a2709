#include "mfspde/harvesting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "mfspde/errors.hpp"

namespace mfspde {

void validate_problem(const HarvestingProblem& pr) {
    if (!pr.b || !pr.sigma || !pr.theta || !pr.alpha || !pr.y0) {
        throw InvalidArgument("harvesting problem: every coefficient must be given");
    }
    if (!(pr.u_min > 0.0) || !(pr.u_min <= pr.u_max)) {
        throw InvalidArgument("harvesting problem: need 0 < u_min <= u_max");
    }
    for (double x : pr.grid.nodes) {
        if (!(pr.y0(x) > 0.0)) throw InvalidArgument("harvesting problem: y0 must be positive");
        if (pr.alpha(x) < 0.0) throw InvalidArgument("harvesting problem: alpha must be >= 0");
        for (std::size_t k = 0; k <= pr.time.n_steps; ++k) {
            for (double e : pr.levy.marks) {
                if (!(pr.theta(pr.time.time(k), x, e) > -1.0)) {
                    throw InvalidArgument("harvesting problem: theta must exceed -1 at every mark");
                }
            }
        }
    }
}

HarvestingProblem make_harvesting_problem(const SpatialGrid& grid, const TimeGrid& time,
                                          const LevyMeasure& levy, double b, double sigma,
                                          double theta_scale, double alpha, SpaceFn y0) {
    HarvestingProblem pr;
    pr.grid = grid;
    pr.time = time;
    pr.levy = levy;
    pr.b = [b](double, double) { return b; };
    pr.sigma = [sigma](double, double) { return sigma; };
    pr.theta = [theta_scale](double, double, double e) { return theta_scale * e; };
    pr.alpha = [alpha](double) { return alpha; };
    if (y0) {
        pr.y0 = std::move(y0);
    } else {
        const double lo = grid.x_min, width = grid.x_max - grid.x_min;
        pr.y0 = [lo, width](double x) { return 1.0 + std::sin(std::numbers::pi * (x - lo) / width); };
    }
    return pr;
}

ForwardConfig harvesting_forward_config(const HarvestingProblem& pr, std::size_t threads) {
    validate_problem(pr);
    ForwardConfig cfg;
    cfg.grid = pr.grid;
    cfg.op = assemble_operator_L(pr.grid, pr.kappa);
    cfg.time = pr.time;
    cfg.levy = pr.levy;
    cfg.coeffs = harvesting_coefficients(pr.b, pr.sigma, pr.theta, pr.alpha);
    cfg.F = MeanFieldOperator::expectation();
    cfg.G = MeanFieldOperator::expectation();
    cfg.initial.resize(pr.grid.n_interior);
    for (std::size_t i = 0; i < pr.grid.n_interior; ++i) cfg.initial[i] = pr.y0(pr.grid.nodes[i]);
    cfg.threads = threads;
    return cfg;
}

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

struct FeedbackTarget {
    std::vector<double> target;      // clamp(1 / (Y p_hat)), adapted layout
    std::vector<double> residuals;   // |u Y p_hat - 1| at non-clamped points
    std::size_t clamped = 0;
};

FeedbackTarget feedback_target(const ForwardPath& path, const AdjointTriple& adj,
                               const ControlField& u) {
    const std::size_t N = path.n_steps(), M = path.n_scenarios(), n = path.n_nodes();
    FeedbackTarget ft;
    ft.target.resize(N * M * n);
    for (std::size_t t = 0; t < N; ++t) {
        for (std::size_t s = 0; s < M; ++s) {
            for (std::size_t i = 0; i < n; ++i) {
                const double yp = path.states[t](s, i) * adj.p_hat[t](s, i);
                const double raw = yp > 0.0 ? 1.0 / yp : std::numeric_limits<double>::infinity();
                const double v = std::clamp(raw, u.u_min(), u.u_max());
                ft.target[(t * M + s) * n + i] = v;
                if (v != raw) {
                    ++ft.clamped;
                } else {
                    ft.residuals.push_back(std::abs(u.value(t, s, i) * yp - 1.0));
                }
            }
        }
    }
    return ft;
}

}  // namespace

HarvestingSolution solve_harvesting(const HarvestingProblem& pr, const NoisePath& noise,
                                    const HarvestingOptions& opts) {
    if (!(opts.tol_fp >= 0.0)) throw InvalidArgument("tol_fp must be nonnegative");
    if (!(opts.damping > 0.0 && opts.damping <= 1.0)) throw InvalidArgument("damping must be in (0,1]");
    if (opts.max_outer == 0) throw InvalidArgument("max_outer must be >= 1");
    const auto cfg = harvesting_forward_config(pr, opts.threads);
    const std::size_t N = pr.time.n_steps, M = noise.n_scenarios, n = pr.grid.n_interior;

    // start from the feedback at the terminal costate, held constant in time
    std::vector<double> init(N * M * n);
    for (std::size_t t = 0; t < N; ++t) {
        for (std::size_t s = 0; s < M; ++s) {
            for (std::size_t i = 0; i < n; ++i) {
                const double x = pr.grid.nodes[i];
                const double yp = pr.y0(x) * pr.alpha(x);
                init[(t * M + s) * n + i] =
                    std::clamp(yp > 0.0 ? 1.0 / yp : pr.u_max, pr.u_min, pr.u_max);
            }
        }
    }
    ControlField u = ControlField::adapted(N, M, n, std::move(init), pr.u_min, pr.u_max);

    HarvestingSolution best;
    double best_change = std::numeric_limits<double>::infinity();
    RegressionDiagnostics diag;
    std::size_t it = 0;
    for (; it < opts.max_outer; ++it) {
        auto path = solve_forward(cfg, noise, u);
        auto adj = solve_adjoint(cfg, noise, path, opts.reg);
        diag.merge(adj.diagnostics);
        const auto ft = feedback_target(path, adj.triple, u);

        std::vector<double> change(ft.target.size());
        for (std::size_t k = 0; k < change.size(); ++k) change[k] = std::abs(ft.target[k] - u.values()[k]);
        const double med_change = median(std::move(change));
        const double med_res = median(ft.residuals);
        best.change_history.push_back(med_change);
        best.residual_history.push_back(med_res);

        const bool done = med_change <= opts.tol_fp && med_res <= opts.tol_fp;
        if (done) {
            // final undamped update, then forward and adjoint under u* itself
            ControlField ustar = ControlField::adapted(N, M, n, ft.target, pr.u_min, pr.u_max);
            best.path = solve_forward(cfg, noise, ustar);
            auto adj_star = solve_adjoint(cfg, noise, best.path, opts.reg);
            diag.merge(adj_star.diagnostics);
            const auto ft_star = feedback_target(best.path, adj_star.triple, ustar);
            best.adjoint = std::move(adj_star.triple);
            best.control = std::move(ustar);
            best.median_fp_residual = median(ft_star.residuals);
            best.clamped_points = ft_star.clamped;
            best.converged = true;
            break;
        }
        if (med_change < best_change) {
            best_change = med_change;
            best.path = std::move(path);
            best.adjoint = std::move(adj.triple);
            best.control = u;
            best.median_fp_residual = med_res;
            best.clamped_points = ft.clamped;
        }
        std::vector<double> next(ft.target.size());
        for (std::size_t k = 0; k < next.size(); ++k) {
            next[k] = std::clamp((1.0 - opts.damping) * u.values()[k] + opts.damping * ft.target[k],
                                 pr.u_min, pr.u_max);
        }
        u = ControlField::adapted(N, M, n, std::move(next), pr.u_min, pr.u_max);
    }
    best.iterations = std::min(it + 1, opts.max_outer);
    best.diagnostics = diag;

    // eventually decreasing: the last half of the change sequence is monotone
    const auto& ch = best.change_history;
    best.change_eventually_decreasing = ch.size() >= 2;
    for (std::size_t k = ch.size() / 2 + 1; k < ch.size(); ++k) {
        if (ch[k] > ch[k - 1]) best.change_eventually_decreasing = false;
    }
    best.J = performance(cfg, best.path);
    return best;
}

OptimalityReport verify_harvest_optimality(const HarvestingProblem& pr,
                                           const HarvestingSolution& sol, const NoisePath& noise,
                                           std::size_t n_challengers, std::uint64_t seed,
                                           std::size_t threads) {
    const auto cfg = harvesting_forward_config(pr, threads);
    const std::size_t N = pr.time.n_steps, M = noise.n_scenarios, n = pr.grid.n_interior;
    const auto& ustar = sol.control;
    if (ustar.mode() != ControlField::Mode::Adapted || ustar.n_scenarios() != M) {
        throw InvalidArgument("verify_harvest_optimality: solution control does not match the noise");
    }
    OptimalityReport rep;
    const auto Jstar = evaluate_J(cfg, noise, ustar);
    rep.J_star = Jstar.value;
    rep.J_star_std_error = Jstar.std_error;

    auto add = [&](std::string name, const ControlField& c) {
        const auto Jc = evaluate_J(cfg, noise, c);
        const auto d = paired_difference(Jstar, Jc);
        ChallengerResult r;
        r.name = std::move(name);
        r.J = Jc.value;
        r.diff = d.diff;
        r.std_error = d.std_error;
        r.beats = -d.diff > 2.0 * d.std_error;
        if (r.beats) ++rep.n_beating;
        rep.challengers.push_back(std::move(r));
    };
    auto from_values = [&](std::vector<double> v) {
        for (auto& x : v) x = std::clamp(x, pr.u_min, pr.u_max);
        return ControlField::adapted(N, M, n, std::move(v), pr.u_min, pr.u_max);
    };

    add("u_star", ustar);
    add("constant_u_min", ControlField::constant(N, n, pr.u_min, pr.u_min, pr.u_max));

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t c = 0; c < n_challengers; ++c) {
        std::vector<double> v = ustar.values();
        switch (c % 4) {
            case 0: {
                const double k = 0.7 + 0.6 * unit(rng);
                for (auto& x : v) x *= k;
                add("scaled_" + std::to_string(c), from_values(std::move(v)));
                break;
            }
            case 1: {
                const double k = 0.2 + 2.8 * unit(rng);
                add("constant_" + std::to_string(c), ControlField::constant(N, n, k, pr.u_min, pr.u_max));
                break;
            }
            case 2: {
                for (auto& x : v) x *= std::exp(0.2 * normal(rng));
                add("noisy_" + std::to_string(c), from_values(std::move(v)));
                break;
            }
            default: {
                // additive bump on a random space-time patch
                const std::size_t t0 = static_cast<std::size_t>(unit(rng) * static_cast<double>(N / 2));
                const std::size_t t1 = std::min(N, t0 + 1 + N / 4);
                const std::size_t i0 = static_cast<std::size_t>(unit(rng) * static_cast<double>(n / 2));
                const std::size_t i1 = std::min(n, i0 + 1 + n / 4);
                const double a = (unit(rng) < 0.5 ? -1.0 : 1.0) * (0.1 + 0.4 * unit(rng));
                for (std::size_t t = t0; t < t1; ++t) {
                    for (std::size_t s = 0; s < M; ++s) {
                        for (std::size_t i = i0; i < i1; ++i) v[(t * M + s) * n + i] += a;
                    }
                }
                add("bump_" + std::to_string(c), from_values(std::move(v)));
                break;
            }
        }
    }
    return rep;
}

}  // namespace mfspde
