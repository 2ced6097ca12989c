#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "analysis.hpp"
#include "ergodic.hpp"
#include "grid.hpp"
#include "tridiag.hpp"

namespace kmfg {

/// B(x) = x / (e^x - 1), the exponential-fitting flux weight.
inline double bernoulli_B(double x) {
    if (std::abs(x) < 1e-5) return 1.0 - 0.5 * x + x * x / 12.0;
    if (x > 700.0) return x * std::exp(-x);
    if (x < -700.0) return -x;
    return x / std::expm1(x);
}

enum class ScaleTag { Physical, Rescaled };

/// Time-indexed pair (u, m) on [0, T] with the coupling moment per step.
struct DynamicTrajectory {
    GridPtr grid;
    double kappa = 0.0;
    double T = 0.0;
    double dt = 0.0;
    std::vector<double> times;
    std::vector<ScalarField> u;
    std::vector<ScalarField> m;
    std::vector<double> coupling; // b(t_k) = kappa (1 - ∫ V m_k)
    ScaleTag scale = ScaleTag::Physical;
    int iterations = 0;
    bool converged = false;
    std::vector<double> residual_history;

    int n_steps() const { return static_cast<int>(times.size()) - 1; }
};

inline double coupling_moment(const ScalarField& m, double kappa) {
    const auto& x = m.grid->x;
    const double Vm = m.grid->spacing * kahan_accumulate(m.size(), [&](int i) {
                          return potential_V(x[i]) * m[i];
                      });
    return kappa * (1.0 - Vm);
}

/// Backward value-function sweep by the exact Cole-Hopf linearization:
/// phi = e^{-u/2} satisfies phi_t + phi_xx = (b(t)/2) V phi, integrated by
/// implicit steps toward t = 0. phi is renormalized every step with the log
/// of the scale carried separately, so arbitrary horizons cannot overflow.
/// Positivity of phi is structural (M-matrix solve) and asserted.
inline std::vector<ScalarField> solve_hjb_backward(const std::vector<ScalarField>& m_traj,
                                                   const ScalarField& terminal_u, double kappa,
                                                   double dt) {
    const int K = static_cast<int>(m_traj.size()) - 1;
    if (K < 1) throw std::invalid_argument("solve_hjb_backward: need at least one step");
    const auto& grid = terminal_u.grid;
    const int n = grid->n_cells;
    const double h = grid->spacing;
    const double w = dt / (h * h);

    std::vector<double> V(n);
    for (int i = 0; i < n; ++i) V[i] = potential_V(grid->x[i]);

    std::vector<ScalarField> u(K + 1, ScalarField(grid, Parity::Even));
    u[K] = terminal_u;

    std::vector<double> phi(n);
    for (int i = 0; i < n; ++i) phi[i] = std::exp(-0.5 * terminal_u[i]);
    double log_scale = 0.0;

    Tridiag M;
    M.lower.assign(n - 1, -w);
    M.upper.assign(n - 1, -w);
    M.diag.assign(n, 0.0);

    for (int k = K - 1; k >= 0; --k) {
        const double b = coupling_moment(m_traj[k], kappa);
        double min_diag_pot = 0.0;
        for (int i = 0; i < n; ++i) {
            const double add = (i == 0 || i == n - 1) ? w : 2.0 * w;
            M.diag[i] = 1.0 + add + 0.5 * dt * b * V[i];
            min_diag_pot = std::min(min_diag_pot, 1.0 + 0.5 * dt * b * V[i]);
        }
        if (min_diag_pot <= 0.0)
            throw std::runtime_error("solve_hjb_backward: dt too large for negative coupling b=" +
                                     std::to_string(b));
        phi = thomas_solve(M, phi);
        double mx = 0.0;
        for (double v : phi) {
            if (!(v > 0.0))
                throw std::runtime_error("solve_hjb_backward: Cole-Hopf state lost positivity");
            mx = std::max(mx, v);
        }
        for (double& v : phi) v /= mx;
        log_scale += std::log(mx);
        for (int i = 0; i < n; ++i) u[k][i] = -2.0 * (std::log(phi[i]) + log_scale);
    }
    return u;
}

/// Forward Fokker-Planck sweep with the exponential-fitting (Scharfetter-
/// Gummel) flux J = (B(-s) m_{i+1} - B(s) m_i)/h, s = u_{i+1} - u_i, implicit
/// in time with zero-flux boundary faces. Columns of the step matrix sum to
/// one, so mass is conserved exactly; the matrix is an M-matrix, so positivity
/// is unconditional. The discrete Gibbs density of the drift is an exact
/// stationary state of the scheme.
inline std::vector<ScalarField> solve_fp_forward(const std::vector<ScalarField>& u_traj,
                                                 const ScalarField& initial_m, double dt) {
    const int K = static_cast<int>(u_traj.size()) - 1;
    if (K < 1) throw std::invalid_argument("solve_fp_forward: need at least one step");
    const auto& grid = initial_m.grid;
    const int n = grid->n_cells;
    const double w = dt / (grid->spacing * grid->spacing);

    for (double v : initial_m.values)
        if (!(v > 0.0)) throw std::invalid_argument("solve_fp_forward: initial density not positive");

    std::vector<ScalarField> m(K + 1, ScalarField(grid, Parity::Even));
    m[0] = initial_m;

    Tridiag M;
    M.lower.assign(n - 1, 0.0);
    M.upper.assign(n - 1, 0.0);
    M.diag.assign(n, 0.0);
    std::vector<double> Bp(n - 1), Bm(n - 1);

    for (int k = 0; k < K; ++k) {
        const auto& u = u_traj[k + 1];
        for (int f = 0; f + 1 < n; ++f) {
            const double s = u[f + 1] - u[f];
            Bp[f] = bernoulli_B(s);
            Bm[f] = bernoulli_B(-s);
        }
        for (int i = 0; i < n; ++i) {
            double d = 1.0;
            if (i < n - 1) d += w * Bp[i];
            if (i > 0) d += w * Bm[i - 1];
            M.diag[i] = d;
            if (i < n - 1) M.upper[i] = -w * Bm[i];
            if (i > 0) M.lower[i - 1] = -w * Bp[i - 1];
        }
        auto next = thomas_solve(M, m[k].values);
        for (double v : next)
            if (!(v > 0.0))
                throw std::runtime_error("solve_fp_forward: density lost positivity");
        m[k + 1].values = std::move(next);
    }
    return m;
}

struct MfgParams {
    double kappa = 0.0;
    double T = 0.0;
    double dt = 0.0;       // <= 0 selects h^2/2
    double theta = 0.5;    // Picard damping, halved automatically on residual growth
    double tol = 1e-10;    // sup_t L1 increment
    int max_iter = 60;
};

inline void require_even(const ScalarField& f, const char* who) {
    const double scale = std::max(sup_norm(f.values), 1e-30);
    if (max_asymmetry(f) > 1e-8 * scale)
        throw std::invalid_argument(std::string(who) + ": data must be even");
}

/// Damped Picard coupling of the two sweeps. Non-convergence is an outcome,
/// not an error: the best iterate comes back flagged.
inline DynamicTrajectory solve_mfg(const ScalarField& initial_m, const ScalarField& terminal_u,
                                   const MfgParams& p) {
    if (!(p.theta > 0.0 && p.theta <= 1.0))
        throw std::invalid_argument("solve_mfg: theta must lie in (0, 1]");
    if (!(p.kappa > 0.0) || !(p.T > 0.0) || !(p.tol > 0.0))
        throw std::invalid_argument("solve_mfg: kappa, T, tol must be positive");
    if (!same_grid(*initial_m.grid, *terminal_u.grid))
        throw std::invalid_argument("solve_mfg: grid mismatch");
    require_even(initial_m, "solve_mfg initial_m");
    require_even(terminal_u, "solve_mfg terminal_u");
    const double mass = integrate(initial_m);
    if (std::abs(mass - 1.0) > 1e-8)
        throw std::invalid_argument("solve_mfg: initial density must have unit mass");

    const auto& grid = initial_m.grid;
    const double h = grid->spacing;
    double dt = p.dt > 0.0 ? p.dt : 0.5 * h * h;
    const int K = std::max(1, static_cast<int>(std::ceil(p.T / dt - 1e-12)));
    dt = p.T / K;

    DynamicTrajectory traj;
    traj.grid = grid;
    traj.kappa = p.kappa;
    traj.T = p.T;
    traj.dt = dt;
    traj.times.resize(K + 1);
    for (int k = 0; k <= K; ++k) traj.times[k] = k * dt;
    traj.m.assign(K + 1, initial_m);
    traj.scale = ScaleTag::Physical;

    double theta = p.theta;
    double last_res = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= p.max_iter; ++it) {
        traj.u = solve_hjb_backward(traj.m, terminal_u, p.kappa, dt);
        auto m_new = solve_fp_forward(traj.u, initial_m, dt);
        double res = 0.0;
        for (int k = 0; k <= K; ++k) {
            double l1 = 0.0;
            for (int i = 0; i < grid->n_cells; ++i) l1 += std::abs(m_new[k][i] - traj.m[k][i]);
            res = std::max(res, theta * h * l1);
        }
        for (int k = 0; k <= K; ++k)
            for (int i = 0; i < grid->n_cells; ++i)
                traj.m[k][i] = (1.0 - theta) * traj.m[k][i] + theta * m_new[k][i];
        traj.residual_history.push_back(res);
        traj.iterations = it;
        if (res <= p.tol) {
            traj.converged = true;
            break;
        }
        if (res > last_res) theta = std::max(0.5 * theta, 1.0 / 64.0);
        last_res = res;
    }
    // final consistent value sweep against the converged density path
    traj.u = solve_hjb_backward(traj.m, terminal_u, p.kappa, dt);
    traj.coupling.resize(K + 1);
    for (int k = 0; k <= K; ++k) traj.coupling[k] = coupling_moment(traj.m[k], p.kappa);
    return traj;
}

/// Gauge shift u = u~ - kappa ∫_0^t ∫ cos y m(s, y) dy ds (trapezoid in time);
/// u_x is invariant. gauge_transform applies the shift, gauge_inverse undoes it.
inline std::vector<ScalarField> gauge_transform(const std::vector<ScalarField>& u_tilde,
                                                const std::vector<ScalarField>& m_traj,
                                                double kappa, double dt, double sign = -1.0) {
    if (u_tilde.size() != m_traj.size())
        throw std::invalid_argument("gauge_transform: time grids must match");
    const int K = static_cast<int>(u_tilde.size()) - 1;
    std::vector<double> c(K + 1);
    for (int k = 0; k <= K; ++k) {
        const auto& m = m_traj[k];
        c[k] = m.grid->spacing * kahan_accumulate(m.size(), [&](int i) {
                   return std::cos(m.grid->x[i]) * m[i];
               });
    }
    std::vector<ScalarField> out(u_tilde.begin(), u_tilde.end());
    double G = 0.0;
    for (int k = 0; k <= K; ++k) {
        if (k > 0) G += 0.5 * dt * (c[k - 1] + c[k]);
        const double shift = sign * kappa * G;
        for (int i = 0; i < out[k].size(); ++i) out[k][i] += shift;
    }
    return out;
}

inline std::vector<ScalarField> gauge_inverse(const std::vector<ScalarField>& u,
                                              const std::vector<ScalarField>& m_traj,
                                              double kappa, double dt) {
    return gauge_transform(u, m_traj, kappa, dt, +1.0);
}

/// Rescaled deviations from the stationary pair and the functional
/// Phi(t) = ∫ mu-bar v_x^2 + (Q/sqrt(kappa)) ∫ zeta^2 / mu-bar, with the
/// physical-scale integrand sqrt(kappa) Phi alongside.
struct DeviationFields {
    GridPtr rescaled_grid;
    double dt_rescaled = 0.0;
    std::vector<double> times_rescaled;
    std::vector<ScalarField> v;    // even; v = w - w_bar - lambda_bar (T_r - t)
    std::vector<ScalarField> zeta; // even, zero mean
    std::vector<double> phi;
    std::vector<double> phi_physical;
    double Q = 0.0;
};

inline DeviationFields compute_phi(const DynamicTrajectory& traj, const ErgodicSolution& stat) {
    if (traj.scale != ScaleTag::Physical)
        throw std::invalid_argument("compute_phi: trajectory must be physical-scale");
    if (!same_grid(*traj.grid, *stat.grid) || traj.kappa != stat.kappa)
        throw std::invalid_argument("compute_phi: stationary solution does not match trajectory");

    const auto r = rescale(stat);
    const double k14 = std::pow(traj.kappa, 0.25);
    const double rk = std::sqrt(traj.kappa);
    const int K = traj.n_steps();
    const int n = traj.grid->n_cells;

    DeviationFields dev;
    dev.rescaled_grid = r.grid;
    dev.dt_rescaled = traj.dt * rk;
    dev.Q = compute_Q(stat);
    dev.times_rescaled.resize(K + 1);
    dev.v.assign(K + 1, ScalarField(r.grid, Parity::Even));
    dev.zeta.assign(K + 1, ScalarField(r.grid, Parity::Even));
    dev.phi.resize(K + 1);
    dev.phi_physical.resize(K + 1);

    const double T_r = traj.T * rk;
    const double hy = r.grid->spacing;
    for (int k = 0; k <= K; ++k) {
        const double t_r = traj.times[k] * rk;
        dev.times_rescaled[k] = t_r;
        for (int i = 0; i < n; ++i) {
            dev.v[k][i] = traj.u[k][i] - r.w[i] - r.lambda * (T_r - t_r);
            dev.zeta[k][i] = traj.m[k][i] / k14 - r.mu[i];
        }
        const auto vx = diff_neumann(dev.v[k]);
        const double grad = hy * kahan_accumulate(n, [&](int i) {
                                return r.mu[i] * vx[i] * vx[i];
                            });
        const double dens = hy * kahan_accumulate(n, [&](int i) {
                                return dev.zeta[k][i] * dev.zeta[k][i] / r.mu[i];
                            });
        dev.phi[k] = grad + (dev.Q / rk) * dens;
        dev.phi_physical[k] = rk * dev.phi[k];
    }
    return dev;
}

/// Per-step check of the domination hypothesis m(t,x) <= c kappa^{1/4} m-bar(x).
struct DominationCheck {
    bool all_ok = true;
    int violations = 0;
    double worst_ratio = 0.0; // max over steps/nodes of m / (c k^{1/4} m-bar)
};

inline DominationCheck check_domination(const DynamicTrajectory& traj, const ErgodicSolution& stat,
                                        double c_dom) {
    DominationCheck out;
    const double bound = c_dom * std::pow(traj.kappa, 0.25);
    for (const auto& mk : traj.m) {
        double ratio = 0.0;
        for (int i = 0; i < mk.size(); ++i) ratio = std::max(ratio, mk[i] / stat.m[i]);
        out.worst_ratio = std::max(out.worst_ratio, ratio / bound);
        if (ratio > bound * (1.0 + 1e-12)) {
            out.all_ok = false;
            ++out.violations;
        }
    }
    return out;
}

} // namespace kmfg
