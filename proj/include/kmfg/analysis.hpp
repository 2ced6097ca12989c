#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ergodic.hpp"
#include "grid.hpp"
#include "linearized.hpp"
#include "tridiag.hpp"

namespace kmfg {

/// delta of the envelope regime a in [0, 1 - delta].
inline constexpr double kDeltaEnvelope = 0.05;

/// Weighted Poincare constant of ∫ f^2 mu <= C_P ∫ f_x^2 mu over weighted-mean-zero f.
/// C_P = 1/gap, where gap is the second-smallest eigenvalue of the generalized
/// pencil (stiffness with face weights, lumped mass); the constant mode is the
/// kernel, so deflation is just taking the k = 1 eigenvalue. Face weights are
/// geometric means, computed as sqrt(a)*sqrt(b) so deep Gaussian tails do not
/// underflow.
inline double poincare_constant(const ScalarField& mu) {
    const int n = mu.size();
    const double h = mu.grid->spacing;
    for (double v : mu.values)
        if (!(v > 0.0)) throw std::invalid_argument("poincare_constant: weight must be positive");
    const double mass = integrate(mu);
    if (std::abs(mass - 1.0) > 1e-6)
        throw std::invalid_argument("poincare_constant: weight must have unit mass");

    // B^{-1/2} A B^{-1/2} with A the face-weighted stiffness, B = diag(h mu_i)
    std::vector<double> wface(n - 1);
    for (int i = 0; i + 1 < n; ++i)
        wface[i] = std::sqrt(mu[i]) * std::sqrt(mu[i + 1]);
    SymTridiag t;
    t.diag.assign(n, 0.0);
    t.off.assign(n - 1, 0.0);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        if (i > 0) s += wface[i - 1];
        if (i < n - 1) s += wface[i];
        t.diag[i] = s / (h * h * mu[i]);
    }
    for (int i = 0; i + 1 < n; ++i)
        t.off[i] = -wface[i] / (h * h * std::sqrt(mu[i]) * std::sqrt(mu[i + 1]));

    auto [glo, ghi] = gershgorin_bounds(t);
    const double gap = kth_eigenvalue(t, 1, glo, ghi);
    if (!(gap > 0.0)) throw std::runtime_error("poincare_constant: nonpositive spectral gap");
    return 1.0 / gap;
}

/// Q = ∫ kappa x^4 m-bar dx (physical scale). The rescaled form ∫ y^4 mu-bar dy
/// is the same sum term by term; compute_Q_rescaled exposes it for the
/// change-of-variables check.
inline double compute_Q(const ErgodicSolution& s) {
    const auto& x = s.grid->x;
    return s.grid->spacing * kahan_accumulate(s.m.size(), [&](int i) {
               const double x2 = x[i] * x[i];
               return s.kappa * x2 * x2 * s.m[i];
           });
}

/// ∫ y^4 f(y) dy by midpoint quadrature.
inline double fourth_moment(const ScalarField& f) {
    const auto& y = f.grid->x;
    return f.grid->spacing * kahan_accumulate(f.size(), [&](int i) {
               const double y2 = y[i] * y[i];
               return y2 * y2 * f[i];
           });
}

inline double compute_Q_rescaled(const RescaledSolution& r) { return fourth_moment(r.mu); }

/// Constants entering the turnpike estimate at one kappa.
struct StabilityConstants {
    double kappa = 0.0;
    double C_P = 0.0;
    double Q = 0.0;
    double c_dom = 0.0;      // sqrt(C_P/Q), the domination constant
    double C_turnpike = 0.0; // 16 (C_P + 1/C_P + 1/Q)
    double omega = 0.0;      // (log 2 / C_turnpike) kappa^{1/4}
};

inline StabilityConstants make_stability_constants(const ErgodicSolution& stationary) {
    StabilityConstants c;
    c.kappa = stationary.kappa;
    auto r = rescale(stationary);
    c.C_P = poincare_constant(r.mu);
    c.Q = compute_Q(stationary);
    c.c_dom = std::sqrt(c.C_P / c.Q);
    c.C_turnpike = 16.0 * (c.C_P + 1.0 / c.C_P + 1.0 / c.Q);
    c.omega = std::log(2.0) / c.C_turnpike * std::pow(c.kappa, 0.25);
    return c;
}

/// Result of checking ∫_{t1}^{t2} phi <= C (phi(t1) + phi(t2)) on sampled pairs
/// and, where T >= 8C leaves room, the windowed-average exponential bound
/// (1/4C) ∫_t^{t+4C} phi <= 4 (e^{-w t} + e^{-w (T-t)}) (phi(0)+phi(T)),
/// w = log 2 / 4C. phi is treated as the piecewise-linear interpolant of its
/// samples. With T < 8C the window set is empty and bounds hold vacuously.
struct DecayCheck {
    bool hypothesis_ok = true;
    long pairs_checked = 0;
    std::vector<std::pair<int, int>> violations; // sample-index pairs, capped at 100
    double worst_pair_ratio = 0.0;               // max of ∫ / (phi(t1)+phi(t2))
    std::vector<double> window_t;
    std::vector<double> window_avg;
    std::vector<double> window_bound;
    bool bounds_ok = true;
};

inline DecayCheck decay_from_integral_inequality(std::span<const double> phi, double dt, double C,
                                                 std::uint64_t pair_seed = 0) {
    const int n = static_cast<int>(phi.size());
    if (n < 2) throw std::invalid_argument("decay_from_integral_inequality: need >= 2 samples");
    if (!(dt > 0.0) || !(C > 0.0))
        throw std::invalid_argument("decay_from_integral_inequality: dt and C must be positive");
    for (double v : phi)
        if (v < 0.0)
            throw std::invalid_argument("decay_from_integral_inequality: phi must be nonnegative");

    const double T = dt * (n - 1);
    std::vector<double> prefix(n, 0.0); // trapezoid ∫_0^{t_i} phi
    for (int i = 1; i < n; ++i) prefix[i] = prefix[i - 1] + 0.5 * dt * (phi[i] + phi[i - 1]);

    DecayCheck out;
    double phimax = 0.0;
    for (double v : phi) phimax = std::max(phimax, v);
    const double slack = 1e-12 * std::max(phimax, 1e-300) * std::max(T, 1.0);

    auto check_pair = [&](int i, int j) {
        const double lhs = prefix[j] - prefix[i];
        const double rhs = C * (phi[i] + phi[j]);
        ++out.pairs_checked;
        if (rhs > 0.0) out.worst_pair_ratio = std::max(out.worst_pair_ratio, lhs / (phi[i] + phi[j]));
        if (lhs > rhs + slack) {
            out.hypothesis_ok = false;
            if (out.violations.size() < 100) out.violations.emplace_back(i, j);
        }
    };

    if (static_cast<long>(n) * (n - 1) / 2 <= 2'000'000L) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) check_pair(i, j);
    } else {
        std::mt19937_64 rng(pair_seed);
        std::uniform_int_distribution<int> pick(0, n - 1);
        for (long k = 0; k < 1'000'000L; ++k) {
            int i = pick(rng), j = pick(rng);
            if (i == j) continue;
            if (i > j) std::swap(i, j);
            check_pair(i, j);
        }
    }

    // windowed averages, only meaningful when T >= 8C leaves [0, T-4C] nonempty
    const double W = 4.0 * C;
    const double omega = std::log(2.0) / W;
    auto interp_prefix = [&](double t) {
        const int i = std::min(static_cast<int>(t / dt), n - 2);
        const double frac = t - i * dt;
        const double phit = phi[i] + (phi[i + 1] - phi[i]) * (frac / dt);
        return prefix[i] + 0.5 * frac * (phi[i] + phit);
    };
    const double K = phi[0] + phi[n - 1];
    for (int i = 0; i < n; ++i) {
        const double t = i * dt;
        if (t + W > T + 1e-12 * std::max(T, 1.0)) break;
        const double avg = (interp_prefix(std::min(t + W, T)) - prefix[i]) / W;
        const double bound = 4.0 * (std::exp(-omega * t) + std::exp(-omega * (T - t))) * K;
        out.window_t.push_back(t);
        out.window_avg.push_back(avg);
        out.window_bound.push_back(bound);
        if (out.hypothesis_ok && avg > bound + slack) out.bounds_ok = false;
    }
    return out;
}

/// Right-hand side of the pointwise-from-average bound
/// f(t)^2 <= 2 L (t2 - t1) ∫ f + (∫ f)^2 for Lipschitz f >= 0; the literal
/// form is a valid consequence of the mean-value argument once t2 - t1 >= 1.
struct PointwiseBound {
    double bound = 0.0;
    double max_f_sq = 0.0;
    bool holds = false;
};

inline PointwiseBound pointwise_from_average(std::span<const double> f, double dt,
                                             double lipschitz_bound) {
    const int n = static_cast<int>(f.size());
    if (n < 2) throw std::invalid_argument("pointwise_from_average: need >= 2 samples");
    for (double v : f)
        if (v < 0.0) throw std::invalid_argument("pointwise_from_average: negative sample");
    double max_slope = 0.0;
    for (int i = 1; i < n; ++i) max_slope = std::max(max_slope, std::abs(f[i] - f[i - 1]) / dt);
    if (lipschitz_bound < max_slope * (1.0 - 1e-12))
        throw std::invalid_argument("pointwise_from_average: lipschitz_bound below data slope");

    double I = 0.0;
    for (int i = 1; i < n; ++i) I += 0.5 * dt * (f[i] + f[i - 1]);
    const double span_t = dt * (n - 1);
    PointwiseBound out;
    out.bound = 2.0 * lipschitz_bound * span_t * I + I * I;
    for (double v : f) out.max_f_sq = std::max(out.max_f_sq, v * v);
    out.holds = out.max_f_sq <= out.bound * (1.0 + 1e-12);
    return out;
}

/// Envelope witnesses: c1 k^{1/2} x^2 - c3 <= u <= c2 k^{1/2} x^2 + c3,
/// C^{-1} k^{1/4} e^{-c2 k^{1/2} x^2} <= m <= C k^{1/4} e^{-c1 k^{1/2} x^2},
/// |v| <= cbar1 k^{1/2} x^2 + cbar2, and lambda <= ell k^{1/2}.
struct EnvelopeConstants {
    double c1 = std::numeric_limits<double>::infinity();
    double c2 = 0.0;
    double c3 = 0.0;
    double log_C = -std::numeric_limits<double>::infinity();
    double cbar1 = 0.0;
    double cbar2 = 0.0;
    double ell = 0.0;
};

struct EnvelopeCaps {
    double c1_min = 1e-4, c2_max = 10.0, c3_max = 100.0;
    double log_C_max = 12.0, cbar1_max = 100.0, cbar2_max = 1000.0, ell_max = 100.0;
};

struct EnvelopeReport {
    EnvelopeConstants consts;
    double worst_slack = 0.0; // min margin over all nodewise constraints
    bool feasible = false;
};

inline void require_envelope_regime(double a) {
    if (!(a >= 0.0 && a <= 1.0 - kDeltaEnvelope))
        throw std::invalid_argument("fit_envelopes: requires a in [0, 1 - delta]");
}

namespace detail {

/// Tight witnesses for one stationary solution; a 5% pad keeps one fit feasible
/// across neighboring kappa (the profiles drift by O(kappa^{-1/2})).
inline void fit_u_envelope(const ErgodicSolution& s, EnvelopeConstants& e) {
    const double rk = std::sqrt(s.kappa);
    const double x_core = std::pow(s.kappa, -0.25);
    double c2 = 0.0, c1 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < s.u.size(); ++i) {
        const double x = s.grid->x[i];
        if (std::abs(x) <= x_core) continue;
        const double r = s.u[i] / (rk * x * x);
        c2 = std::max(c2, r);
        c1 = std::min(c1, r);
    }
    c2 *= 1.05;
    c1 *= 0.95;
    double c3 = 0.0;
    for (int i = 0; i < s.u.size(); ++i) {
        const double q = rk * s.grid->x[i] * s.grid->x[i];
        c3 = std::max(c3, s.u[i] - c2 * q);
        c3 = std::max(c3, c1 * q - s.u[i]);
    }
    c3 = c3 * 1.05 + 0.5;
    e.c1 = std::min(e.c1, c1);
    e.c2 = std::max(e.c2, c2);
    e.c3 = std::max(e.c3, c3);
    e.ell = std::max(e.ell, 1.05 * s.lambda / rk);
}

inline void fit_m_envelope(const ErgodicSolution& s, EnvelopeConstants& e) {
    const double rk = std::sqrt(s.kappa);
    const double lk4 = 0.25 * std::log(s.kappa);
    double logC = 0.0;
    for (int i = 0; i < s.m.size(); ++i) {
        const double q = rk * s.grid->x[i] * s.grid->x[i];
        const double lm = std::log(s.m[i]);
        logC = std::max(logC, lm - lk4 + e.c1 * q);  // upper envelope
        logC = std::max(logC, -(lm - lk4 + e.c2 * q)); // lower envelope
    }
    e.log_C = std::max(e.log_C, logC + 0.05);
}

} // namespace detail

inline EnvelopeReport fit_envelopes(const ErgodicSolution& s,
                                    const EnvelopeCaps& caps = EnvelopeCaps{}) {
    require_envelope_regime(s.a);
    EnvelopeReport rep;
    detail::fit_u_envelope(s, rep.consts);
    detail::fit_m_envelope(s, rep.consts);
    rep.feasible = rep.consts.c1 >= caps.c1_min && rep.consts.c2 <= caps.c2_max &&
                   rep.consts.c3 <= caps.c3_max && rep.consts.log_C <= caps.log_C_max &&
                   rep.consts.ell <= caps.ell_max;
    return rep;
}

/// Minimum margin of every nodewise inequality for the u and m envelopes.
inline double check_envelopes(const ErgodicSolution& s, const EnvelopeConstants& e) {
    const double rk = std::sqrt(s.kappa);
    const double lk4 = 0.25 * std::log(s.kappa);
    double slack = std::numeric_limits<double>::infinity();
    for (int i = 0; i < s.u.size(); ++i) {
        const double q = rk * s.grid->x[i] * s.grid->x[i];
        slack = std::min(slack, (e.c2 * q + e.c3) - s.u[i]);
        slack = std::min(slack, s.u[i] - (e.c1 * q - e.c3));
        const double lm = std::log(s.m[i]) - lk4;
        slack = std::min(slack, e.log_C - (lm + e.c1 * q));
        slack = std::min(slack, (lm + e.c2 * q) + e.log_C);
        slack = std::min(slack, e.ell * rk - s.lambda);
    }
    return slack;
}

/// Fit including the |v| <= cbar1 k^{1/2} x^2 + cbar2 envelope.
inline EnvelopeReport fit_envelopes(const LinearizedSolution& lin,
                                    const EnvelopeCaps& caps = EnvelopeCaps{}) {
    EnvelopeReport rep = fit_envelopes(lin.base, caps);
    const double rk = std::sqrt(lin.base.kappa);
    const double x_core = std::pow(lin.base.kappa, -0.25);
    double cb1 = 0.0;
    for (int i = 0; i < lin.v.size(); ++i) {
        const double x = lin.base.grid->x[i];
        if (std::abs(x) <= x_core) continue;
        cb1 = std::max(cb1, std::abs(lin.v[i]) / (rk * x * x));
    }
    cb1 *= 1.05;
    double cb2 = 0.0;
    for (int i = 0; i < lin.v.size(); ++i)
        cb2 = std::max(cb2, std::abs(lin.v[i]) - cb1 * rk * lin.base.grid->x[i] * lin.base.grid->x[i]);
    cb2 = cb2 * 1.05 + 0.5;
    rep.consts.cbar1 = std::max(rep.consts.cbar1, cb1);
    rep.consts.cbar2 = std::max(rep.consts.cbar2, cb2);
    rep.feasible = rep.feasible && rep.consts.cbar1 <= caps.cbar1_max &&
                   rep.consts.cbar2 <= caps.cbar2_max;
    return rep;
}

inline double check_envelopes_v(const LinearizedSolution& lin, const EnvelopeConstants& e) {
    const double rk = std::sqrt(lin.base.kappa);
    double slack = std::numeric_limits<double>::infinity();
    for (int i = 0; i < lin.v.size(); ++i) {
        const double q = rk * lin.base.grid->x[i] * lin.base.grid->x[i];
        slack = std::min(slack, (e.cbar1 * q + e.cbar2) - std::abs(lin.v[i]));
    }
    return slack;
}

inline EnvelopeConstants merge_envelopes(const EnvelopeConstants& a, const EnvelopeConstants& b) {
    EnvelopeConstants e;
    e.c1 = std::min(a.c1, b.c1);
    e.c2 = std::max(a.c2, b.c2);
    e.c3 = std::max(a.c3, b.c3);
    e.log_C = std::max(a.log_C, b.log_C);
    e.cbar1 = std::max(a.cbar1, b.cbar1);
    e.cbar2 = std::max(a.cbar2, b.cbar2);
    e.ell = std::max(a.ell, b.ell);
    return e;
}

/// Least-squares slope of log m against x^2 over the Gaussian core
/// |x| <= window_mult * kappa^{-1/4}; approximately -sqrt(kappa(1-a))/2.
inline double envelope_log_slope(const ErgodicSolution& s, double window_mult = 3.0) {
    const double x_max = window_mult * std::pow(s.kappa, -0.25);
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int cnt = 0;
    for (int i = 0; i < s.m.size(); ++i) {
        const double x = s.grid->x[i];
        if (std::abs(x) > x_max) continue;
        const double q = x * x, lm = std::log(s.m[i]);
        sx += q;
        sy += lm;
        sxx += q * q;
        sxy += q * lm;
        ++cnt;
    }
    if (cnt < 4) throw std::runtime_error("envelope_log_slope: core window too small");
    return (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
}

/// Lyapunov-function feasibility for the weighted Poincare proof:
/// with phi = w - w(0) + 1 on the rescaled grid, find the largest beta with
/// -phi'' + phi' w_x >= beta phi outside B(0,r) and the smallest gamma closing
/// the inequality inside. Feasible iff beta > 0; r at or beyond the domain
/// edge leaves no exterior nodes and is flagged vacuous.
struct LyapunovReport {
    double beta = 0.0;
    double gamma = 0.0;
    bool feasible = false;
    bool vacuous = false;
};

inline LyapunovReport verify_lyapunov(const ScalarField& w_bar, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("verify_lyapunov: r must be positive");
    const auto& grid = *w_bar.grid;
    const int n = grid.n_cells;
    const auto dw = diff_neumann(w_bar);
    const auto ddw = second_diff_neumann(w_bar);
    const double w0 = w_bar[n / 2];

    LyapunovReport rep;
    rep.vacuous = r >= grid.half_width;
    double beta = std::numeric_limits<double>::infinity();
    bool any_outside = false;
    for (int i = 0; i < n; ++i) {
        const double G = -ddw[i] + dw[i] * dw[i];
        const double phi = w_bar[i] - w0 + 1.0;
        if (std::abs(grid.x[i]) >= r) {
            beta = std::min(beta, G / phi);
            any_outside = true;
        }
    }
    if (!any_outside) {
        rep.vacuous = true;
        return rep;
    }
    rep.beta = beta;
    double gamma = 0.0;
    for (int i = 0; i < n; ++i) {
        if (std::abs(grid.x[i]) >= r) continue;
        const double G = -ddw[i] + dw[i] * dw[i];
        const double phi = w_bar[i] - w0 + 1.0;
        gamma = std::max(gamma, beta * phi - G);
    }
    rep.gamma = gamma;
    rep.feasible = beta > 0.0 && !rep.vacuous;
    return rep;
}

} // namespace kmfg
