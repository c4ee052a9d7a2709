#include "mfspde/discretization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "mfspde/errors.hpp"

namespace mfspde {

SpatialGrid build_spatial_grid(double x_min, double x_max, std::size_t n_interior) {
    if (!(x_min < x_max)) throw InvalidArgument("degenerate domain: x_min must be < x_max");
    if (n_interior == 0) throw InvalidArgument("degenerate domain: n_interior must be >= 1");
    SpatialGrid g;
    g.x_min = x_min;
    g.x_max = x_max;
    g.n_interior = n_interior;
    g.h = (x_max - x_min) / static_cast<double>(n_interior + 1);
    g.nodes.resize(n_interior);
    for (std::size_t i = 0; i < n_interior; ++i) {
        g.nodes[i] = x_min + static_cast<double>(i + 1) * g.h;
    }
    return g;
}

TimeGrid build_time_grid(double T, std::size_t n_steps) {
    if (!(T > 0.0)) throw InvalidArgument("time horizon T must be positive");
    if (n_steps == 0) throw InvalidArgument("n_steps must be >= 1");
    return TimeGrid{T, n_steps};
}

void DiscreteOperator::apply(std::span<const double> u, std::span<double> out) const {
    const std::size_t n = diag.size();
    if (u.size() != n || out.size() != n) throw InvalidArgument("operator/field size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        double v = diag[i] * u[i];
        if (i > 0) v += lower[i] * u[i - 1];
        if (i + 1 < n) v += upper[i] * u[i + 1];
        out[i] = v;
    }
}

std::vector<double> DiscreteOperator::apply(std::span<const double> u) const {
    std::vector<double> out(diag.size());
    apply(u, out);
    return out;
}

DiscreteOperator assemble_operator_L(const SpatialGrid& grid, double kappa) {
    if (grid.n_interior == 0 || !(grid.h > 0.0)) throw InvalidArgument("invalid grid");
    if (kappa < 0.0) throw InvalidArgument("kappa must be nonnegative");
    const std::size_t n = grid.n_interior;
    const double w = kappa / (grid.h * grid.h);
    DiscreteOperator op;
    op.grid = grid;
    op.kappa = kappa;
    op.lower.assign(n, w);
    op.diag.assign(n, -2.0 * w);
    op.upper.assign(n, w);
    return op;
}

DiscreteOperator adjoint_operator(const DiscreteOperator& op) {
    const std::size_t n = op.size();
    DiscreteOperator t = op;
    // (L^T)[i][i-1] = L[i-1][i] and (L^T)[i][i+1] = L[i+1][i]; boundary couplings
    // stay attached to their own rows.
    for (std::size_t i = 1; i < n; ++i) t.lower[i] = op.upper[i - 1];
    for (std::size_t i = 0; i + 1 < n; ++i) t.upper[i] = op.lower[i + 1];
    return t;
}

double inner_H(const SpatialGrid& grid, std::span<const double> u, std::span<const double> v) {
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
    return grid.h * acc;
}

double norm_H_sq(const SpatialGrid& grid, std::span<const double> u) {
    return inner_H(grid, u, u);
}

double norm_V_sq(const SpatialGrid& grid, std::span<const double> u) {
    double semi = 0.0;
    for (std::size_t i = 0; i + 1 < u.size(); ++i) {
        const double d = (u[i + 1] - u[i]) / grid.h;
        semi += d * d;
    }
    return norm_H_sq(grid, u) + grid.h * semi;
}

ImplicitSolver::ImplicitSolver(const DiscreteOperator& op, double dt) {
    if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
    const std::size_t n = op.size();
    sub_.resize(n);
    diag_.resize(n);
    super_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        sub_[i] = i > 0 ? -dt * op.lower[i] : 0.0;
        super_[i] = i + 1 < n ? -dt * op.upper[i] : 0.0;
        diag_[i] = 1.0 - dt * op.diag[i];
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (diag_[i - 1] == 0.0) throw NumericalError("singular implicit operator");
        const double m = sub_[i] / diag_[i - 1];
        diag_[i] -= m * super_[i - 1];
        sub_[i] = m;
    }
    if (n > 0 && diag_[n - 1] == 0.0) throw NumericalError("singular implicit operator");
}

void ImplicitSolver::solve(std::span<double> rhs) const {
    const std::size_t n = diag_.size();
    for (std::size_t i = 1; i < n; ++i) rhs[i] -= sub_[i] * rhs[i - 1];
    rhs[n - 1] /= diag_[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) {
        rhs[i] = (rhs[i] - super_[i] * rhs[i + 1]) / diag_[i];
    }
}

namespace {

double coercivity_quotient(const DiscreteOperator& op, double chi, std::span<const double> u) {
    const auto lu = op.apply(u);
    const double form = -2.0 * inner_H(op.grid, lu, u);
    return (form + chi * norm_H_sq(op.grid, u)) / norm_V_sq(op.grid, u);
}

double min_quotient(const DiscreteOperator& op, double chi, std::size_t n_probes,
                    std::uint64_t seed) {
    const std::size_t n = op.size();
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> u(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        std::fill(u.begin(), u.end(), 0.0);
        u[k] = 1.0;
        best = std::min(best, coercivity_quotient(op, chi, u));
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t p = 0; p < n_probes; ++p) {
        double norm = 0.0;
        do {
            norm = 0.0;
            for (auto& v : u) {
                v = normal(rng);
                norm += v * v;
            }
        } while (norm == 0.0);
        best = std::min(best, coercivity_quotient(op, chi, u));
    }
    return best;
}

}  // namespace

CoercivityReport check_coercivity(const DiscreteOperator& op, double chi, double zeta,
                                  std::size_t n_probes, std::uint64_t seed) {
    if (n_probes == 0) throw InvalidArgument("n_probes must be >= 1");
    CoercivityReport r;
    r.chi = chi;
    r.zeta = zeta;
    r.min_quotient = min_quotient(op, chi, n_probes, seed);
    r.satisfied = r.min_quotient >= zeta;
    return r;
}

CoercivityReport certify_coercivity(const DiscreteOperator& op, double chi,
                                    std::size_t n_probes, std::uint64_t seed) {
    if (n_probes == 0) throw InvalidArgument("n_probes must be >= 1");
    CoercivityReport r;
    r.chi = chi;
    r.min_quotient = min_quotient(op, chi, n_probes, seed);
    r.zeta = std::max(0.0, r.min_quotient);
    r.satisfied = r.min_quotient > 0.0;
    return r;
}

}  // namespace mfspde
