#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "grid.hpp"
#include "tridiag.hpp"

namespace kmfg {

/// Stationary solution (u_a, lambda_a, m_a) at parameters (a, kappa).
///
/// lambda is the ground eigenvalue of the Schroedinger operator
/// -d^2/dx^2 + kappa V (1-a)/2 with Neumann conditions; the additive constant
/// appearing in the ergodic Hamilton-Jacobi equation itself is 2*lambda.
/// m is the discrete Gibbs density e^{-u}/∫e^{-u}, exactly unit mass.
struct ErgodicSolution {
    double a = 0.0;
    double kappa = 0.0;
    ScalarField u; // even, u = 0 at the node nearest 0
    ScalarField m; // even, positive, unit mass
    double lambda = 0.0;
    double hjb_residual = 0.0; // sup over interior nodes, see hjb_residual_field
    GridPtr grid;
};

inline SymTridiag neumann_schrodinger_matrix(const Grid1D& g, std::span<const double> q) {
    const int n = g.n_cells;
    const double w = 1.0 / (g.spacing * g.spacing);
    SymTridiag t;
    t.diag.assign(n, 2.0 * w);
    t.diag[0] = w;
    t.diag[n - 1] = w;
    t.off.assign(n - 1, -w);
    for (int i = 0; i < n; ++i) t.diag[i] += q[i];
    return t;
}

/// Residual of -u'' + u'^2/2 + 2*lambda - kappa V (1-a) over interior nodes.
inline double hjb_residual_sup(const ScalarField& u, double lambda, double a, double kappa) {
    const auto du = diff_neumann(u);
    const auto ddu = second_diff_neumann(u);
    const auto& x = u.grid->x;
    double r = 0.0;
    for (int i = 1; i + 1 < u.size(); ++i) {
        const double res = -ddu[i] + 0.5 * du[i] * du[i] + 2.0 * lambda -
                           kappa * potential_V(x[i]) * (1.0 - a);
        r = std::max(r, std::abs(res));
    }
    return r;
}

/// Solve the ergodic problem by the ground-state substitution phi = e^{-u/2}:
/// ground eigenpair of -phi'' + (kappa V (1-a)/2) phi = lambda phi, phi > 0,
/// h * sum phi^2 = 1; then u = -2(log phi - log phi(x_{n/2})), m = phi^2.
inline ErgodicSolution solve_ergodic_direct(double a, double kappa, const GridPtr& grid) {
    if (!(a >= 0.0 && a <= 2.0)) throw std::invalid_argument("solve_ergodic: a must be in [0,2]");
    if (!(kappa > 0.0)) throw std::invalid_argument("solve_ergodic: kappa must be positive");
    const int n = grid->n_cells;
    const double h = grid->spacing;

    std::vector<double> q(n);
    for (int i = 0; i < n; ++i) q[i] = 0.5 * kappa * (1.0 - a) * potential_V(grid->x[i]);
    const auto t = neumann_schrodinger_matrix(*grid, q);

    // start from a bump centered on the potential minimum (constant when a = 1)
    int jmin = 0;
    for (int i = 1; i < n; ++i)
        if (q[i] < q[jmin]) jmin = i;
    const double omega = std::sqrt(kappa * std::max(std::abs(1.0 - a), 1.0 / kappa));
    std::vector<double> start(n);
    for (int i = 0; i < n; ++i) {
        const double d = grid->x[i] - grid->x[jmin];
        start[i] = std::exp(std::max(-0.25 * omega * d * d, -700.0)) + 1e-12;
    }

    EigenPair ep;
    try {
        ep = ground_eigenpair(t, start, 1e-12, /*componentwise_tail=*/true);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error("solve_ergodic(a=" + std::to_string(a) +
                                 ", kappa=" + std::to_string(kappa) + "): " + e.what());
    }

    auto& phi = ep.vector;
    int jmax = 0;
    for (int i = 1; i < n; ++i)
        if (std::abs(phi[i]) > std::abs(phi[jmax])) jmax = i;
    if (phi[jmax] < 0.0)
        for (double& v : phi) v = -v;
    for (double v : phi)
        if (!(v > 0.0))
            throw std::runtime_error("solve_ergodic: ground state lost positivity");

    const double inv_sqrt_h = 1.0 / std::sqrt(h);
    for (double& v : phi) v *= inv_sqrt_h; // now h * sum phi^2 = 1

    ErgodicSolution sol;
    sol.a = a;
    sol.kappa = kappa;
    sol.lambda = ep.value;
    sol.grid = grid;
    sol.u = ScalarField(grid, Parity::Even);
    sol.m = ScalarField(grid, Parity::Even);
    const int i0 = n / 2; // node nearest zero (cell-centered: x = h/2)
    const double log_phi0 = std::log(phi[i0]);
    for (int i = 0; i < n; ++i) {
        sol.u[i] = -2.0 * (std::log(phi[i]) - log_phi0);
        sol.m[i] = phi[i] * phi[i];
    }
    sol.hjb_residual = hjb_residual_sup(sol.u, sol.lambda, a, kappa);
    return sol;
}

/// For a > 1 the solution comes from the a' = 2-a one through the half-period
/// shift u_{2-a}(x) = u_{a'}(x+pi) - u_{a'}(pi) and, in the eigenvalue
/// convention, lambda_{2-a} = lambda_{a'} - kappa (1-a'). The shift maps nodes
/// to nodes because the cell count is even, so the identity is exact discretely.
inline ErgodicSolution solve_ergodic(double a, double kappa, const GridPtr& grid) {
    if (!(a >= 0.0 && a <= 2.0)) throw std::invalid_argument("solve_ergodic: a must be in [0,2]");
    if (a <= 1.0) return solve_ergodic_direct(a, kappa, grid);

    const double a_tilde = 2.0 - a;
    ErgodicSolution base = solve_ergodic_direct(a_tilde, kappa, grid);
    const int n = grid->n_cells;
    const int half = n / 2;

    ErgodicSolution sol;
    sol.a = a;
    sol.kappa = kappa;
    sol.grid = grid;
    sol.lambda = base.lambda - kappa * (1.0 - a_tilde);
    sol.u = ScalarField(grid, Parity::Even);
    sol.m = ScalarField(grid, Parity::Even);
    for (int i = 0; i < n; ++i) {
        const int j = (i + half) % n;
        sol.u[i] = base.u[j];
        sol.m[i] = base.m[j];
    }
    const double u0 = sol.u[half];
    for (int i = 0; i < n; ++i) sol.u[i] -= u0;
    sol.hjb_residual = hjb_residual_sup(sol.u, sol.lambda, a, kappa);
    return sol;
}

/// F_kappa(a) = ∫ V m_a, the fixed-point map of the stationary system.
inline double eval_F(const ErgodicSolution& sol) {
    const auto& x = sol.grid->x;
    return sol.grid->spacing * kahan_accumulate(sol.m.size(), [&](int i) {
               return potential_V(x[i]) * sol.m[i];
           });
}

/// Same value through the cosine moment, F = 1 - ∫ m cos; used as a cross-check.
inline double eval_F_cos(const ErgodicSolution& sol) {
    const auto& x = sol.grid->x;
    return 1.0 - sol.grid->spacing * kahan_accumulate(sol.m.size(), [&](int i) {
                     return std::cos(x[i]) * sol.m[i];
                 });
}

/// Blow-up variables: w(x) = u(x kappa^{-1/4}), mu(x) = kappa^{-1/4} m(x kappa^{-1/4})
/// on [-pi kappa^{1/4}, pi kappa^{1/4}]. lambda here is the rescaled constant of the
/// Hamilton-Jacobi equation, kappa^{-1/2} * (2 lambda_eigen).
struct RescaledSolution {
    GridPtr grid;
    ScalarField w;
    ScalarField mu;
    double lambda = 0.0;
    double kappa = 0.0;
    double a = 0.0;
};

inline RescaledSolution rescale(const ErgodicSolution& sol) {
    const double k14 = std::pow(sol.kappa, 0.25);
    RescaledSolution r;
    r.grid = make_grid(sol.grid->half_width * k14, sol.grid->n_cells);
    r.kappa = sol.kappa;
    r.a = sol.a;
    r.lambda = 2.0 * sol.lambda / std::sqrt(sol.kappa);
    r.w = ScalarField(r.grid, sol.u.values, Parity::Even);
    r.mu = ScalarField(r.grid, Parity::Even);
    for (int i = 0; i < r.mu.size(); ++i) r.mu[i] = sol.m[i] / k14;
    return r;
}

/// Residual of the rescaled equation -w'' + w'^2/2 + lambda_resc - V_k (1-a)
/// over interior nodes (equals kappa^{-1/2} times the physical residual).
inline double rescaled_residual_sup(const RescaledSolution& r) {
    const auto dw = diff_neumann(r.w);
    const auto ddw = second_diff_neumann(r.w);
    const auto& y = r.grid->x;
    double out = 0.0;
    for (int i = 1; i + 1 < r.w.size(); ++i) {
        const double res = -ddw[i] + 0.5 * dw[i] * dw[i] + r.lambda -
                           potential_V_rescaled(y[i], r.kappa) * (1.0 - r.a);
        out = std::max(out, std::abs(res));
    }
    return out;
}

} // namespace kmfg
