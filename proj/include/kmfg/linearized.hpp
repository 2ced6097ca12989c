#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ergodic.hpp"
#include "grid.hpp"

namespace kmfg {

namespace detail {

/// p(x) = e^{u(x)} ∫_0^x e^{-u(s)} src(s) ds for an even source on the base grid.
/// Bulk nodes use midpoint prefix sums of e^{-u} src plus a second-order
/// half-cell closure. Where u exceeds u_switch the direct form would blow up
/// rounding noise by e^{u}; there the complementary tail integral is summed
/// with per-term factors e^{u_i - u_j} <= 1, which stays well conditioned.
/// (The full-domain integral of e^{-u} src vanishes for the sources used here,
/// so the two forms agree up to quadrature order.) Output is odd.
inline std::vector<double> integrating_factor_derivative(const ScalarField& u,
                                                         std::span<const double> src,
                                                         double u_switch = 25.0) {
    const int n = u.size();
    const double h = u.grid->spacing;
    const int half = n / 2;
    std::vector<double> g(n), p(n, 0.0);
    for (int i = 0; i < n; ++i) g[i] = std::exp(-u[i]) * src[i];

    double prefix = 0.0; // h * sum of g over cells half..i-1
    for (int i = half; i < n; ++i) {
        if (u[i] <= u_switch) {
            const double gm = (i == half) ? g[i] : g[i - 1];
            const double I_node = prefix + (h / 8.0) * (gm + 3.0 * g[i]);
            p[i] = std::exp(u[i]) * I_node;
        } else {
            // complementary form: p = -e^{u_i} * ∫_{x_i}^{pi} e^{-u} src
            double tail;
            if (i == n - 1) {
                tail = 0.5 * h * src[i];
            } else {
                tail = (h / 8.0) * (3.0 * src[i] + std::exp(u[i] - u[i + 1]) * src[i + 1]);
                for (int j = i + 1; j < n; ++j) tail += h * std::exp(u[i] - u[j]) * src[j];
            }
            p[i] = -tail;
        }
        prefix += h * g[i];
    }
    for (int i = 0; i < half; ++i) p[i] = -p[n - 1 - i];
    return p;
}

/// Cumulative trapezoid primitive of an odd node field, vanishing at x = 0
/// (the face between the two central cells); output is even.
inline ScalarField odd_primitive(const GridPtr& grid, std::span<const double> dp) {
    const int n = grid->n_cells;
    const double h = grid->spacing;
    const int half = n / 2;
    ScalarField out(grid, Parity::Even);
    out[half] = 0.25 * h * dp[half]; // trapezoid from the face, dp(0) = 0 by oddness
    for (int i = half; i + 1 < n; ++i) out[i + 1] = out[i] + 0.5 * h * (dp[i] + dp[i + 1]);
    for (int i = 0; i < half; ++i) out[i] = out[n - 1 - i];
    return out;
}

} // namespace detail

/// Solution of the linearized ergodic equation -v'' + v' u' + lambda' = -kappa V
/// with v(0) = 0, obtained by the explicit integrating-factor quadrature
/// v'(x) = e^{u(x)} ∫_0^x e^{-u}(lambda' + kappa V); lambda' = -kappa F(a).
struct LinearizedSolution {
    ErgodicSolution base;
    ScalarField v;       // even, v(0) = 0
    ScalarField vprime;  // odd
    double lambda_prime = 0.0;
    double fprime_quadratic = 0.0; // (1/kappa) ∫ v'^2 m
    double fprime_bilinear = 0.0;  // -∫ (lambda'/kappa + V) v m
    std::optional<ScalarField> z;  // near-incoherent corrector, when requested
};

inline LinearizedSolution solve_linearized(const ErgodicSolution& base) {
    const auto& grid = base.grid;
    const int n = grid->n_cells;
    const double kappa = base.kappa;

    LinearizedSolution lin;
    lin.base = base;
    lin.lambda_prime = -kappa * eval_F(base);

    std::vector<double> src(n);
    for (int i = 0; i < n; ++i) src[i] = lin.lambda_prime + kappa * potential_V(grid->x[i]);

    auto dp = detail::integrating_factor_derivative(base.u, src);
    lin.vprime = ScalarField(grid, std::move(dp), Parity::Odd);
    lin.v = detail::odd_primitive(grid, lin.vprime.values);

    lin.fprime_quadratic = (1.0 / kappa) * grid->spacing * kahan_accumulate(n, [&](int i) {
                               return lin.vprime[i] * lin.vprime[i] * base.m[i];
                           });
    lin.fprime_bilinear = -grid->spacing * kahan_accumulate(n, [&](int i) {
        return (lin.lambda_prime / kappa + potential_V(grid->x[i])) * lin.v[i] * base.m[i];
    });
    return lin;
}

/// The two representation-formula values of F'_kappa(a); the first is the
/// manifestly nonnegative quadratic form.
inline std::pair<double, double> fprime_pair(const LinearizedSolution& lin) {
    return {lin.fprime_quadratic, lin.fprime_bilinear};
}

/// Corrector of the near-incoherent expansion v = kappa (cos x - 1 + z).
struct CorrectorSolution {
    ScalarField z;      // even, z(0) = 0
    ScalarField zprime; // odd
    double sup_z = 0.0;
    double sup_zprime = 0.0;
};

/// Solve -z'' + z' u' = sin x u' - (kappa + lambda')/kappa near a = 1.
/// Requires the near-incoherent scaling (1 - a) kappa <= tau_max (<= 1).
inline CorrectorSolution solve_corrector(const ErgodicSolution& base, double tau_max = 1.0) {
    if (!(tau_max > 0.0 && tau_max <= 1.0))
        throw std::invalid_argument("solve_corrector: tau_max must lie in (0, 1]");
    const double tau = (1.0 - base.a) * base.kappa;
    if (!(base.a <= 1.0) || tau > tau_max * (1.0 + 1e-12))
        throw std::invalid_argument("solve_corrector: requires 1 - a <= tau_max / kappa");

    const auto& grid = base.grid;
    const int n = grid->n_cells;
    const double kappa = base.kappa;
    const double lambda_prime = -kappa * eval_F(base);

    const auto du = diff_neumann(base.u);
    std::vector<double> src(n);
    for (int i = 0; i < n; ++i)
        src[i] = std::sin(grid->x[i]) * du[i] - (kappa + lambda_prime) / kappa;

    auto dz = detail::integrating_factor_derivative(base.u, src);
    for (double& t : dz) t = -t; // (e^{-u} z')' = -e^{-u} src

    CorrectorSolution c;
    c.zprime = ScalarField(grid, std::move(dz), Parity::Odd);
    c.z = detail::odd_primitive(grid, c.zprime.values);
    c.sup_z = sup_norm(c.z.values);
    c.sup_zprime = sup_norm(c.zprime.values);
    return c;
}

} // namespace kmfg
