#include "mfspde/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mfspde {

namespace {

PointArgs random_point(std::mt19937_64& rng, const ProbeBox& box) {
    auto draw = [&rng](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    PointArgs a;
    a.t = draw(box.t_lo, box.t_hi);
    a.x = draw(box.x_lo, box.x_hi);
    a.y = draw(box.y_lo, box.y_hi);
    a.ybar = draw(box.ybar_lo, box.ybar_hi);
    a.u = draw(box.u_lo, box.u_hi);
    a.ubar = draw(box.ubar_lo, box.ubar_hi);
    return a;
}

}  // namespace

LipschitzProbe probe_lipschitz(const CoefficientSet& coeffs, double c_probe, const ProbeBox& box,
                               std::size_t n_pairs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    LipschitzProbe r;
    for (std::size_t k = 0; k < n_pairs; ++k) {
        PointArgs a = random_point(rng, box);
        PointArgs b = random_point(rng, box);
        b.t = a.t;
        b.x = a.x;
        b.u = a.u;
        b.ubar = a.ubar;
        const double dist = std::abs(a.y - b.y) + std::abs(a.ybar - b.ybar);
        if (dist == 0.0) continue;
        const double diff = std::abs(coeffs.b(a).value - coeffs.b(b).value);
        r.max_ratio = std::max(r.max_ratio, diff / dist);
    }
    r.within = r.max_ratio <= c_probe;
    return r;
}

DerivativeCheck check_derivatives(const CoefficientSet& coeffs, const ProbeBox& box,
                                  std::span<const double> marks, std::size_t n_points,
                                  std::uint64_t seed, double rel_tol) {
    std::mt19937_64 rng(seed);
    DerivativeCheck out;

    auto compare = [&](const std::string& label, double analytic, double fd) {
        const double err = std::abs(analytic - fd) / std::max(1.0, std::abs(fd));
        if (err > out.max_rel_error) {
            out.max_rel_error = err;
            out.worst = label;
        }
    };

    auto check_point_fn = [&](const std::string& label, const auto& eval, const PointArgs& a) {
        const Sensitivity s = eval(a);
        const double eps = 1e-6;
        auto fd = [&](double PointArgs::*field) {
            PointArgs p = a, m = a;
            const double step = eps * std::max(1.0, std::abs(a.*field));
            p.*field += step;
            m.*field -= step;
            return (eval(p).value - eval(m).value) / (2.0 * step);
        };
        compare(label + ".dy", s.dy, fd(&PointArgs::y));
        compare(label + ".dybar", s.dybar, fd(&PointArgs::ybar));
        compare(label + ".du", s.du, fd(&PointArgs::u));
        compare(label + ".dubar", s.dubar, fd(&PointArgs::ubar));
    };

    for (std::size_t k = 0; k < n_points; ++k) {
        const PointArgs a = random_point(rng, box);
        if (coeffs.drift) check_point_fn("b", coeffs.drift, a);
        if (coeffs.diffusion) check_point_fn("sigma", coeffs.diffusion, a);
        if (coeffs.running) check_point_fn("f", coeffs.running, a);
        if (coeffs.jump) {
            for (double e : marks) {
                check_point_fn("theta", [&](const PointArgs& p) { return coeffs.jump(p, e); }, a);
            }
        }
        if (coeffs.terminal) {
            check_point_fn(
                "g", [&](const PointArgs& p) { return coeffs.terminal(p.x, p.y, p.ybar); }, a);
        }
    }
    out.passed = out.max_rel_error <= rel_tol;
    return out;
}

}  // namespace mfspde
