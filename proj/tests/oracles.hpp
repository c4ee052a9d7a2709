#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace mfspde::test {

/// Dense second-difference matrix kappa * (1, -2, 1) / h^2 with Dirichlet rows,
/// assembled from the formula rather than from the library.
inline Eigen::MatrixXd dense_laplacian(std::size_t n, double h, double kappa) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const double c = kappa / (h * h);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        A(r, r) = -2.0 * c;
        if (i > 0) A(r, r - 1) = c;
        if (i + 1 < n) A(r, r + 1) = c;
    }
    return A;
}

/// Solves A x = b with full-pivot LU.
inline std::vector<double> dense_solve(const Eigen::MatrixXd& A, const std::vector<double>& b) {
    Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    Eigen::VectorXd x = A.fullPivLu().solve(rhs);
    return {x.data(), x.data() + x.size()};
}

/// exp(-kappa pi^2 t) sin(pi x) on (0, 1).
inline double heat_exact(double t, double x, double kappa) {
    return std::exp(-kappa * std::numbers::pi * std::numbers::pi * t) * std::sin(std::numbers::pi * x);
}

/// Implicit Euler applied to sin(pi x_i), which is an eigenvector of the
/// discrete Dirichlet Laplacian on (0, 1): amplitude after n_steps.
inline double implicit_heat_amplitude(double kappa, double h, double dt, std::size_t n_steps) {
    const double s = std::sin(std::numbers::pi * h / 2.0);
    const double lambda = -4.0 * kappa / (h * h) * s * s;
    return std::pow(1.0 / (1.0 - dt * lambda), static_cast<double>(n_steps));
}

/// Classical RK4 for m' = kappa m_xx + b m - u(t, i) m on the interior nodes,
/// with homogeneous Dirichlet data. Returns m at every output time k*T/n_out.
inline std::vector<std::vector<double>> rk4_mean_dynamics(
    std::vector<double> m, double kappa, double h, double b,
    const std::function<double(double t, std::size_t i)>& u, double T, std::size_t n_out,
    std::size_t substeps) {
    const std::size_t n = m.size();
    auto rhs = [&](double t, const std::vector<double>& y) {
        std::vector<double> d(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double l = i > 0 ? y[i - 1] : 0.0;
            const double r = i + 1 < n ? y[i + 1] : 0.0;
            d[i] = kappa * (l - 2.0 * y[i] + r) / (h * h) + b * y[i] - u(t, i) * y[i];
        }
        return d;
    };
    std::vector<std::vector<double>> out{m};
    const double dt = T / static_cast<double>(n_out * substeps);
    double t = 0.0;
    for (std::size_t k = 0; k < n_out; ++k) {
        for (std::size_t j = 0; j < substeps; ++j) {
            const auto k1 = rhs(t, m);
            std::vector<double> y(n);
            for (std::size_t i = 0; i < n; ++i) y[i] = m[i] + 0.5 * dt * k1[i];
            const auto k2 = rhs(t + 0.5 * dt, y);
            for (std::size_t i = 0; i < n; ++i) y[i] = m[i] + 0.5 * dt * k2[i];
            const auto k3 = rhs(t + 0.5 * dt, y);
            for (std::size_t i = 0; i < n; ++i) y[i] = m[i] + dt * k3[i];
            const auto k4 = rhs(t + dt, y);
            for (std::size_t i = 0; i < n; ++i) m[i] += dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
            t += dt;
        }
        out.push_back(m);
    }
    return out;
}

/// Harvesting Hamiltonian written out by hand:
///   log(y u) + (b ybar - y u) p + sigma y q + sum_k theta_scale e_k y gamma_k nu_k
inline double harvesting_H(double y, double ybar, double u, double p, double q,
                           const std::vector<double>& gamma, double b, double sigma,
                           double theta_scale, const std::vector<double>& marks,
                           const std::vector<double>& nus) {
    double h = std::log(y * u) + (b * ybar - y * u) * p + sigma * y * q;
    for (std::size_t k = 0; k < marks.size(); ++k) h += theta_scale * marks[k] * y * gamma[k] * nus[k];
    return h;
}

/// Central difference of a scalar function.
inline double central_diff(const std::function<double(double)>& f, double x, double eps) {
    return (f(x + eps) - f(x - eps)) / (2.0 * eps);
}

}  // namespace mfspde::test
