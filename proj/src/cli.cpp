#include "mfspde/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <random>
#include <utility>

#include "CLI11.hpp"
#include "mfspde/errors.hpp"
#include "mfspde/io.hpp"

namespace mfspde {

using nlohmann::json;

RunConfig apply_overrides(RunConfig cfg, const CliRequest& req) {
    if (req.seed) cfg.master_seed = *req.seed;
    if (req.out) cfg.output_dir = *req.out;
    if (req.threads) cfg.threads = *req.threads;
    validate_run_config(cfg);
    return cfg;
}

std::string hashed_config_text(const RunConfig& cfg) {
    RunConfig c = cfg;
    c.threads = 1;
    c.output_dir = ".";
    return to_config_text(c);
}

namespace {

double node_x(const ForwardConfig& fc, std::size_t i) { return fc.grid.nodes[i]; }

struct Moments {
    double mean = 0.0, var = 0.0, min = 0.0, max = 0.0;
};

Moments node_moments(const FieldEnsemble& e, std::size_t i) {
    const std::size_t M = e.n_scenarios();
    Moments m;
    m.mean = e.node_mean(i);
    m.min = m.max = e(0, i);
    double ss = 0.0;
    for (std::size_t s = 0; s < M; ++s) {
        const double v = e(s, i);
        ss += (v - m.mean) * (v - m.mean);
        m.min = std::min(m.min, v);
        m.max = std::max(m.max, v);
    }
    m.var = M > 1 ? ss / static_cast<double>(M - 1) : 0.0;
    return m;
}

json diagnostics_json(const RegressionDiagnostics& d) {
    return {{"fits", d.fits}, {"fallbacks", d.fallbacks}, {"max_condition", d.max_condition}};
}

json mp_json(const MPReport& r) {
    return {{"sup_residual", r.sup_residual},
            {"max_abs_residual", r.max_abs_residual},
            {"median_scale", r.median_scale},
            {"n_points", r.n_points},
            {"n_excluded", r.n_excluded},
            {"J", r.J},
            {"J_std_error", r.J_std_error},
            {"regression", diagnostics_json(r.diagnostics)}};
}

/// Rows (t, x, rms, mean) of a residual field.
std::vector<std::vector<double>> residual_rows(const ForwardConfig& fc,
                                               const std::vector<FieldEnsemble>& r) {
    std::vector<std::vector<double>> rows;
    for (std::size_t t = 0; t < r.size(); ++t) {
        for (std::size_t i = 0; i < r[t].n_nodes(); ++i) {
            const auto m = node_moments(r[t], i);
            double ss = 0.0;
            for (std::size_t s = 0; s < r[t].n_scenarios(); ++s) ss += r[t](s, i) * r[t](s, i);
            rows.push_back({fc.time.time(t), node_x(fc, i),
                            std::sqrt(ss / static_cast<double>(r[t].n_scenarios())), m.mean});
        }
    }
    return rows;
}

NoisePath config_noise(const RunConfig& cfg) {
    return sample_noise(build_time_grid(cfg.T, cfg.n_steps),
                        make_levy_measure(cfg.marks, cfg.intensities), cfg.n_scenarios,
                        cfg.master_seed, cfg.threads);
}

// ---------------------------------------------------------------------------
// Commands

void cmd_simulate(const RunConfig& cfg, ResultBundle& bundle, json& summary) {
    const auto fc = make_forward_config(cfg);
    const auto noise = config_noise(cfg);
    const auto path = solve_forward(fc, noise, make_control(cfg));
    std::vector<std::vector<double>> rows;
    for (std::size_t t = 0; t <= fc.time.n_steps; ++t) {
        for (std::size_t i = 0; i < fc.grid.n_interior; ++i) {
            const auto m = node_moments(path.states[t], i);
            rows.push_back({fc.time.time(t), node_x(fc, i), m.mean, m.var, m.min, m.max});
        }
    }
    bundle.add_csv("forward_summary.csv", {"t", "x", "mean", "variance", "min", "max"}, rows);
    summary["floor_hits"] = path.floor_hits;
}

void cmd_adjoint(const RunConfig& cfg, ResultBundle& bundle, json& summary) {
    const auto fc = make_forward_config(cfg);
    const auto noise = config_noise(cfg);
    const auto path = solve_forward(fc, noise, make_control(cfg));
    const auto adj = solve_adjoint(fc, noise, path, make_regression(cfg));
    const auto& tr = adj.triple;
    std::vector<std::string> header{"t", "x", "p_mean", "p_sd", "q_mean", "q_sd"};
    for (std::size_t k = 0; k < fc.levy.size(); ++k) {
        header.push_back("gamma" + std::to_string(k + 1) + "_mean");
        header.push_back("gamma" + std::to_string(k + 1) + "_sd");
    }
    std::vector<std::vector<double>> rows;
    for (std::size_t t = 0; t < fc.time.n_steps; ++t) {
        for (std::size_t i = 0; i < fc.grid.n_interior; ++i) {
            const auto p = node_moments(tr.p[t], i);
            const auto q = node_moments(tr.q[t], i);
            std::vector<double> row{fc.time.time(t), node_x(fc, i), p.mean, std::sqrt(p.var),
                                    q.mean, std::sqrt(q.var)};
            for (std::size_t k = 0; k < fc.levy.size(); ++k) {
                const auto g = node_moments(tr.gamma[t][k], i);
                row.push_back(g.mean);
                row.push_back(std::sqrt(g.var));
            }
            rows.push_back(std::move(row));
        }
    }
    bundle.add_csv("adjoint_summary.csv", header, rows);
    bundle.add_json("regression_diagnostics.json", diagnostics_json(adj.diagnostics));
    summary["regression"] = diagnostics_json(adj.diagnostics);
}

void cmd_harvest(const RunConfig& cfg, ResultBundle& bundle, json& summary) {
    const auto pr = make_harvesting_problem(cfg);
    const auto opts = make_harvesting_options(cfg);
    const auto noise = config_noise(cfg);
    const auto sol = solve_harvesting(pr, noise, opts);
    const auto fc = harvesting_forward_config(pr, cfg.threads);
    const auto opt = verify_harvest_optimality(pr, sol, noise, cfg.n_challengers,
                                               cfg.challenger_seed, cfg.threads);
    const auto mp = check_necessary(fc, noise, sol.control, InfoFiltration{cfg.delay},
                                    make_regression(cfg));

    json h;
    h["status"] = sol.converged ? "ok" : "warning";
    h["converged"] = sol.converged;
    h["iterations"] = sol.iterations;
    h["change_eventually_decreasing"] = sol.change_eventually_decreasing;
    h["J"] = sol.J.value;
    h["J_std_error"] = sol.J.std_error;
    h["median_fp_residual"] = sol.median_fp_residual;
    h["clamped_points"] = sol.clamped_points;
    h["change_history"] = sol.change_history;
    h["residual_history"] = sol.residual_history;
    h["mp_sup_residual"] = mp.sup_residual;
    h["challengers_beating"] = opt.n_beating;
    json ch = json::array();
    for (const auto& c : opt.challengers) {
        ch.push_back({{"name", c.name}, {"J", c.J}, {"diff", c.diff},
                      {"std_error", c.std_error}, {"beats", c.beats}});
    }
    h["challengers"] = ch;
    bundle.add_json("harvest_summary.json", h);
    bundle.add_json("mp_report.json", mp_json(mp));

    std::vector<std::vector<double>> rows;
    const std::size_t M = noise.n_scenarios;
    for (std::size_t t = 0; t < fc.time.n_steps; ++t) {
        for (std::size_t i = 0; i < fc.grid.n_interior; ++i) {
            double u = 0.0;
            for (std::size_t s = 0; s < M; ++s) u += sol.control.value(t, s, i);
            rows.push_back({fc.time.time(t), node_x(fc, i), u / static_cast<double>(M),
                            sol.path.states[t].node_mean(i), sol.adjoint.p_hat[t].node_mean(i)});
        }
    }
    bundle.add_csv("harvest_fields.csv", {"t", "x", "u_mean", "Y_mean", "p_mean"}, rows);
    summary["status"] = h["status"];
    summary["J"] = sol.J.value;
    summary["iterations"] = sol.iterations;
}

/// Terminal value for the backward Picard run: the forward terminal state
/// plus a smooth profile, so the iterates are not trivially small.
FieldEnsemble picard_terminal(const ForwardConfig& fc, const ForwardPath& path) {
    FieldEnsemble xi = path.states.back();
    const double lo = fc.grid.x_min, w = fc.grid.x_max - fc.grid.x_min;
    for (std::size_t s = 0; s < xi.n_scenarios(); ++s) {
        for (std::size_t i = 0; i < xi.n_nodes(); ++i) {
            xi(s, i) += std::sin(std::numbers::pi * (fc.grid.nodes[i] - lo) / w);
        }
    }
    return xi;
}

json picard_json(const RunConfig& cfg) {
    const auto fc = make_forward_config(cfg);
    const auto noise = config_noise(cfg);
    const auto u = make_control(cfg);
    const auto pf = picard_forward(fc, noise, u, cfg.picard_iters);
    const auto path = solve_forward(fc, noise, u);
    const auto pb = picard_backward(fc, noise, path, picard_terminal(fc, path),
                                    lipschitz_meanfield_generator(fc.levy), make_regression(cfg),
                                    cfg.picard_iters);
    json j;
    j["forward"] = {{"distances", pf.distances},
                    {"distance_to_fixed_point", pf.distance_to_fixed_point},
                    {"decay_rates", pf.decay_rates},
                    {"decay_accelerating", pf.decay_accelerating},
                    {"factorial_slope", pf.factorial_slope}};
    j["backward"] = {{"distances", pb.distances},
                     {"ratios", pb.ratios},
                     {"regression", diagnostics_json(pb.diagnostics)}};
    return j;
}

void cmd_picard(const RunConfig& cfg, ResultBundle& bundle, json&) {
    bundle.add_json("picard.json", picard_json(cfg));
}

void cmd_optimize(const RunConfig& cfg, ResultBundle& bundle, json& summary) {
    const auto fc = make_forward_config(cfg);
    const auto noise = config_noise(cfg);
    const auto res = gradient_ascent(fc, noise, make_control(cfg), cfg.ascent_steps, cfg.ascent_eta,
                                     InfoFiltration{cfg.delay}, make_regression(cfg));
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < res.J_trace.size(); ++k) {
        rows.push_back({static_cast<double>(k), res.J_trace[k], res.residual_trace[k]});
    }
    bundle.add_csv("ascent_trace.csv", {"step", "J", "residual"}, rows);
    bundle.add_csv("residual_field.csv", {"t", "x", "rms", "mean"}, residual_rows(fc, res.residual));
    summary["J_initial"] = res.J_trace.front();
    summary["J_final"] = res.J_trace.back();
}

// ---------------------------------------------------------------------------
// Verification suites

json check(const std::string& name, bool pass, json measured) {
    return {{"name", name}, {"pass", pass}, {"measured", std::move(measured)}};
}

json suite_noise(const RunConfig& cfg) {
    json checks = json::array();
    // z-scores of sparse jump counts are unreliable on small ensembles, so the
    // check always uses at least 1e5 draws
    RunConfig big = cfg;
    big.n_scenarios = std::max<std::size_t>(cfg.n_scenarios, 100000);
    const auto noise = config_noise(big);
    const std::size_t N = noise.n_steps(), M = noise.n_scenarios, K = noise.n_marks();
    // running sums of dW and of each compensated count must have mean zero
    std::vector<double> W(M, 0.0);
    std::vector<std::vector<double>> P(K, std::vector<double>(M, 0.0));
    double worst = 0.0;
    bool pass = M > 1;
    for (std::size_t t = 0; t < N; ++t) {
        for (std::size_t s = 0; s < M; ++s) {
            W[s] += noise.brownian(s, t);
            for (std::size_t k = 0; k < K; ++k) P[k][s] += noise.compensated(s, t, k);
        }
        auto zscore = [M](const std::vector<double>& v) {
            double m = 0.0, ss = 0.0;
            for (double x : v) m += x;
            m /= static_cast<double>(M);
            for (double x : v) ss += (x - m) * (x - m);
            const double se = std::sqrt(ss / static_cast<double>(M - 1) / static_cast<double>(M));
            return se > 0.0 ? std::abs(m) / se : 0.0;
        };
        if (M < 2) break;
        double z = zscore(W);
        for (std::size_t k = 0; k < K; ++k) z = std::max(z, zscore(P[k]));
        worst = std::max(worst, z);
        if (z > 4.0) pass = false;
    }
    checks.push_back(check("martingale_means_within_4se", pass, {{"max_abs_z", worst}}));

    const auto again = sample_noise(noise.time, noise.levy, M, cfg.master_seed, cfg.threads + 2);
    checks.push_back(check("noise_independent_of_threads", again == noise, json::object()));
    return checks;
}

json suite_operators(const RunConfig& cfg) {
    json checks = json::array();
    const auto grid = build_spatial_grid(cfg.x_min, cfg.x_max, cfg.n_interior);
    const auto L = assemble_operator_L(grid, cfg.kappa);
    const auto Ls = adjoint_operator(L);
    std::mt19937_64 rng(cfg.master_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        std::vector<double> phi(grid.n_interior), psi(grid.n_interior);
        for (auto& v : phi) v = normal(rng);
        for (auto& v : psi) v = normal(rng);
        const double a = inner_H(grid, Ls.apply(phi), psi);
        const double b = inner_H(grid, phi, L.apply(psi));
        const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
        worst = std::max(worst, std::abs(a - b) / scale);
    }
    checks.push_back(check("adjointness", worst <= 1e-12, {{"max_rel_error", worst}}));
    const auto rep = certify_coercivity(L, 1.0, 200, cfg.master_seed);
    checks.push_back(check("coercivity", rep.satisfied && rep.zeta > 0.0,
                           {{"chi", rep.chi}, {"zeta", rep.zeta}}));
    return checks;
}

json suite_picard(const RunConfig& cfg) {
    json checks = json::array();
    const auto pj = picard_json(cfg);
    const std::vector<double> d = pj["forward"]["distances"];
    bool decreasing = d.size() >= 3;
    for (std::size_t n = 2; n < d.size(); ++n) {
        // d[n-1] is d_n; below round-off both may be zero
        if (!(d[n] < d[n - 1] || (d[n] <= 1e-26 && d[n - 1] <= 1e-26))) decreasing = false;
    }
    const double r52 = d.size() >= 5 && d[1] > 0.0 ? d[4] / d[1] : 1.0;
    checks.push_back(check("forward_decreasing", decreasing, {{"distances", d}}));
    checks.push_back(check("forward_d5_over_d2", d.size() >= 5 && r52 < 0.05, {{"ratio", r52}}));
    const std::vector<double> r = pj["backward"]["ratios"];
    double worst = 0.0;
    for (double x : r) worst = std::max(worst, x);
    checks.push_back(check("backward_ratio_le_half", !r.empty() && worst <= 0.5,
                           {{"max_ratio", worst}, {"ratios", r}}));
    return checks;
}

json suite_meanfield(const RunConfig& cfg) {
    json checks = json::array();
    std::mt19937_64 rng(cfg.master_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t M = std::min<std::size_t>(cfg.n_scenarios, 500);
    std::vector<double> x(M), z(M);
    for (auto& v : x) v = 1.0 + 0.3 * normal(rng);
    for (auto& v : z) v = normal(rng);
    const std::vector<std::pair<std::string, MeanFieldOperator>> ops{
        {"expectation", MeanFieldOperator::expectation()},
        {"square_moment", MeanFieldOperator::square_moment()},
        {"exp_moment", MeanFieldOperator::exp_moment(0.5)},
        {"scaled", MeanFieldOperator::scaled(0.5)},
        {"config_F", make_meanfield(cfg.F)},
        {"config_G", make_meanfield(cfg.G)}};
    for (const auto& [name, op] : ops) {
        const double eps = 1e-5;
        std::vector<double> xp(M), xm(M);
        for (std::size_t s = 0; s < M; ++s) {
            xp[s] = x[s] + eps * z[s];
            xm[s] = x[s] - eps * z[s];
        }
        const double fd = (op.apply(xp) - op.apply(xm)) / (2.0 * eps);
        const double pairing = empirical_pairing(op.gradient(x), z);
        const double err = std::abs(fd - pairing) / std::max(std::abs(fd), 1e-12);
        checks.push_back(check("frechet_gradient_" + name, err <= 1e-6,
                               {{"fd", fd}, {"pairing", pairing}, {"rel_error", err}}));
    }
    return checks;
}

json suite_mp(const RunConfig& cfg) {
    json checks = json::array();
    const auto fc = make_forward_config(cfg);
    const auto noise = config_noise(cfg);
    const auto u = make_control(cfg);
    const auto reg = make_regression(cfg);
    const InfoFiltration filt{cfg.delay};
    std::mt19937_64 rng(cfg.challenger_seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double z[] = {1e-2, 5e-3};
    for (int d = 0; d < 3; ++d) {
        std::vector<double> b(cfg.n_steps * cfg.n_interior);
        for (auto& v : b) v = unit(rng);
        const auto beta = ControlField::deterministic(cfg.n_steps, cfg.n_interior, std::move(b),
                                                      -1e300, 1e300);
        const auto g = gateaux_J(fc, noise, u, beta, z, filt, reg);
        const double scale = std::max({std::abs(g.fd_derivative), std::abs(g.pairing_value), 1e-12});
        const double err = std::abs(g.fd_derivative - g.pairing_value) / scale;
        checks.push_back(check("gateaux_pairing_" + std::to_string(d), err <= 0.05,
                               {{"fd", g.fd_derivative}, {"pairing", g.pairing_value},
                                {"rel_error", err}}));
    }
    // concavity is reported, not asserted: the harvesting Hamiltonian is not
    // jointly concave in (y, u) everywhere
    ProbeBox box;
    box.t_hi = cfg.T;
    box.x_lo = cfg.x_min;
    box.x_hi = cfg.x_max;
    const auto v = check_concavity(fc.coeffs, fc.levy, box, {}, 200, cfg.challenger_seed);
    json c = check("concavity_report", true,
                   {{"concave", v.pass}, {"function", v.function}, {"gap", v.gap},
                    {"probes", v.probes}});
    c["asserted"] = false;
    checks.push_back(c);
    return checks;
}

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"noise", "operators", "picard", "meanfield", "mp"};
    return names;
}

}  // namespace

json run_suite(const std::string& suite, const RunConfig& cfg) {
    json checks;
    if (suite == "noise") checks = suite_noise(cfg);
    else if (suite == "operators") checks = suite_operators(cfg);
    else if (suite == "picard") checks = suite_picard(cfg);
    else if (suite == "meanfield") checks = suite_meanfield(cfg);
    else if (suite == "mp") checks = suite_mp(cfg);
    else throw ConfigError("suite", "unknown suite '" + suite + "' (noise, operators, picard, meanfield, mp, all)");
    bool pass = true;
    for (const auto& c : checks) pass = pass && c["pass"].get<bool>();
    return {{"suite", suite}, {"pass", pass}, {"checks", checks}};
}

int run_command(const CliRequest& req, std::ostream& out, std::ostream& err) {
    try {
        static const std::vector<std::string> commands{"simulate", "adjoint", "harvest",
                                                       "picard", "optimize", "verify"};
        if (std::find(commands.begin(), commands.end(), req.command) == commands.end()) {
            throw ConfigError("command", "unknown command '" + req.command + "'");
        }
        if (req.command == "verify" && req.suite != "all" &&
            std::find(suite_names().begin(), suite_names().end(), req.suite) == suite_names().end()) {
            throw ConfigError("suite", "unknown suite '" + req.suite + "' (noise, operators, picard, meanfield, mp, all)");
        }
        const RunConfig cfg = apply_overrides(load_run_config(req.config_path), req);

        ResultBundle bundle;
        json summary;
        int code = kExitOk;
        if (req.command == "simulate") cmd_simulate(cfg, bundle, summary);
        else if (req.command == "adjoint") cmd_adjoint(cfg, bundle, summary);
        else if (req.command == "harvest") cmd_harvest(cfg, bundle, summary);
        else if (req.command == "picard") cmd_picard(cfg, bundle, summary);
        else if (req.command == "optimize") cmd_optimize(cfg, bundle, summary);
        else {
            json report;
            bool pass = true;
            const std::vector<std::string> suites =
                req.suite == "all" ? suite_names() : std::vector<std::string>{req.suite};
            for (const auto& s : suites) {
                auto r = run_suite(s, cfg);
                pass = pass && r["pass"].get<bool>();
                for (const auto& c : r["checks"]) {
                    out << (c["pass"].get<bool>() ? "PASS " : "FAIL ") << s << "/"
                        << c["name"].get<std::string>() << "\n";
                }
                report["suites"].push_back(std::move(r));
            }
            report["pass"] = pass;
            bundle.add_json("verify_report.json", report);
            summary["pass"] = pass;
            if (!pass) code = kExitVerifyFailed;
        }
        const auto manifest =
            bundle.write(cfg.output_dir, req.command, to_config_text(cfg), hashed_config_text(cfg));
        summary["bundle_hash"] = manifest["bundle_hash"];
        out << req.command << ": " << summary.dump() << "\n";
        return code;
    } catch (const ConfigError& e) {
        err << e.what() << "\n";
        return kExitConfig;
    } catch (const InvalidArgument& e) {
        err << "invalid input: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Optimal control of mean-field SPDEs with jumps"};
    app.require_subcommand(0, 1);
    CliRequest req;
    bool version = false;
    app.add_flag("--version", version, "Print the artifact version");

    std::uint64_t seed = 0;
    std::string out_dir;
    std::size_t threads = 1;
    const std::pair<const char*, const char*> subcommands[] = {
        {"simulate", "Forward ensemble and summary statistics"},
        {"adjoint", "Forward plus adjoint triple and regression diagnostics"},
        {"harvest", "Solve the harvesting problem and verify optimality"},
        {"picard", "Forward and backward Picard contraction diagnostics"},
        {"optimize", "Projected gradient ascent on J"},
        {"verify", "Run self-check suites"},
    };
    for (const auto& [name, help] : subcommands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", req.config_path, "Config file")->required();
        sub->add_option("--seed", seed, "Master seed (overrides the config)");
        sub->add_option("--out", out_dir, "Output directory (overrides the config)");
        sub->add_option("--threads", threads, "Worker threads; results do not depend on it")
            ->check(CLI::PositiveNumber);
        if (std::string(name) == "verify") {
            sub->add_option("--suite", req.suite, "noise | operators | picard | meanfield | mp | all");
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return kExitConfig;
    }
    if (version) {
        out << "mfspde " << kArtifactVersion << "\n";
        return kExitOk;
    }
    const auto subs = app.get_subcommands();
    if (subs.empty()) {
        err << "missing command (simulate, adjoint, harvest, picard, optimize, verify)\n";
        return kExitConfig;
    }
    auto* sub = subs.front();
    req.command = sub->get_name();
    if (sub->count("--seed")) req.seed = seed;
    if (sub->count("--out")) req.out = out_dir;
    if (sub->count("--threads")) req.threads = threads;
    return run_command(req, out, err);
}

}  // namespace mfspde
