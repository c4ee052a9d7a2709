#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mfspde {

/// Uniform grid on the open interval (x_min, x_max) with n_interior nodes
/// x_i = x_min + i*h, i = 1..n_interior. Boundary values are not stored.
struct SpatialGrid {
    double x_min = 0.0;
    double x_max = 1.0;
    std::size_t n_interior = 1;
    double h = 0.5;
    std::vector<double> nodes;

    std::size_t size() const noexcept { return n_interior; }
};

/// Throws InvalidArgument when x_min >= x_max or n_interior == 0.
SpatialGrid build_spatial_grid(double x_min, double x_max, std::size_t n_interior);

/// Uniform partition of [0, T] into n_steps intervals.
struct TimeGrid {
    double T = 1.0;
    std::size_t n_steps = 1;

    double dt() const noexcept { return T / static_cast<double>(n_steps); }
    double time(std::size_t k) const noexcept { return T * static_cast<double>(k) / static_cast<double>(n_steps); }
};

TimeGrid build_time_grid(double T, std::size_t n_steps);

/// Tridiagonal operator acting on interior values with homogeneous Dirichlet
/// closure. Row i reads lower[i]*u[i-1] + diag[i]*u[i] + upper[i]*u[i+1];
/// lower[0] and upper[n-1] are the couplings to the (absent) boundary values
/// and are kept so the forward solver can inject boundary data.
struct DiscreteOperator {
    SpatialGrid grid;
    double kappa = 0.5;
    std::vector<double> lower;
    std::vector<double> diag;
    std::vector<double> upper;

    std::size_t size() const noexcept { return diag.size(); }

    /// out = L u with zero boundary values.
    void apply(std::span<const double> u, std::span<double> out) const;
    std::vector<double> apply(std::span<const double> u) const;
};

/// kappa * (u[i-1] - 2u[i] + u[i+1]) / h^2 with Dirichlet rows.
DiscreteOperator assemble_operator_L(const SpatialGrid& grid, double kappa);

/// Transpose with respect to the discrete L2 inner product h * sum(u v).
/// The weight is uniform so this is the matrix transpose.
DiscreteOperator adjoint_operator(const DiscreteOperator& op);

/// h * sum_i u_i v_i
double inner_H(const SpatialGrid& grid, std::span<const double> u, std::span<const double> v);
/// |u|_H^2
double norm_H_sq(const SpatialGrid& grid, std::span<const double> u);
/// |u|_H^2 + h * sum over interior edges of ((u[i+1]-u[i])/h)^2
double norm_V_sq(const SpatialGrid& grid, std::span<const double> u);

/// Factorization of (I - dt*L) for repeated Thomas solves.
class ImplicitSolver {
public:
    ImplicitSolver() = default;
    ImplicitSolver(const DiscreteOperator& op, double dt);

    /// Solves (I - dt L) x = rhs in place.
    void solve(std::span<double> rhs) const;

    std::size_t size() const noexcept { return diag_.size(); }

private:
    std::vector<double> sub_;    // subdiagonal of I - dt L
    std::vector<double> diag_;   // pivots after elimination
    std::vector<double> super_;  // modified superdiagonal
};

struct CoercivityReport {
    double chi = 0.0;
    double zeta = 0.0;
    double min_quotient = 0.0;
    bool satisfied = false;
};

/// Evaluates (2<-Lu,u> + chi|u|_H^2) / ||u||_V^2 on n_probes random fields
/// and every canonical basis field. satisfied iff the minimum is >= zeta.
CoercivityReport check_coercivity(const DiscreteOperator& op, double chi, double zeta,
                                  std::size_t n_probes, std::uint64_t seed);

/// Same probing, but reports the largest certified constant: zeta is set to the
/// minimum quotient and satisfied iff it is strictly positive.
CoercivityReport certify_coercivity(const DiscreteOperator& op, double chi,
                                    std::size_t n_probes, std::uint64_t seed);

}  // namespace mfspde
