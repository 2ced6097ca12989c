#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "dynamic.hpp"

namespace kmfg {

struct EstimateRecord {
    bool applicable = true;
    bool passed = false;
    long checked = 0;
    long failed = 0;
    double worst_margin = 0.0; // min over checks of (bound - value) / max(bound, floor)
    std::string note;
};

/// Discrete residual of the duality identity
/// d/dt ∫ v zeta = -∫ ((mu + mu-bar)/2) v_x^2 + kappa^{-1/2} (∫ V_k zeta)^2,
/// centered in rescaled time at interior steps.
struct DualityCheck {
    double max_residual = 0.0;
    double scale = 0.0;     // max over steps of |lhs|, |rhs|
    double tol_basis = 0.0; // dt_r + h_y^2
};

inline DualityCheck duality_residual(const DynamicTrajectory& traj, const ErgodicSolution& stat,
                                     const DeviationFields& dev) {
    const auto r = rescale(stat);
    const double k14 = std::pow(traj.kappa, 0.25);
    const double rk = std::sqrt(traj.kappa);
    const int K = traj.n_steps();
    const int n = traj.grid->n_cells;
    const double hy = r.grid->spacing;
    const double dtr = dev.dt_rescaled;

    std::vector<double> P(K + 1), rhs(K + 1);
    for (int k = 0; k <= K; ++k) {
        P[k] = hy * kahan_accumulate(n, [&](int i) { return dev.v[k][i] * dev.zeta[k][i]; });
        const auto vx = diff_neumann(dev.v[k]);
        const double diss = hy * kahan_accumulate(n, [&](int i) {
                                const double mu_k = traj.m[k][i] / k14;
                                return 0.5 * (mu_k + r.mu[i]) * vx[i] * vx[i];
                            });
        const double mom = hy * kahan_accumulate(n, [&](int i) {
                               return potential_V_rescaled(r.grid->x[i], traj.kappa) *
                                      dev.zeta[k][i];
                           });
        rhs[k] = -diss + mom * mom / rk;
    }
    DualityCheck out;
    out.tol_basis = dtr + hy * hy;
    for (int k = 1; k < K; ++k) {
        const double lhs = (P[k + 1] - P[k - 1]) / (2.0 * dtr);
        out.max_residual = std::max(out.max_residual, std::abs(lhs - rhs[k]));
        out.scale = std::max(out.scale, std::max(std::abs(lhs), std::abs(rhs[k])));
    }
    return out;
}

/// Exponential rate fitted to log Phi on the window [0.2 T, 0.5 T] (physical
/// time); positive when the deviation decays into the turnpike plateau.
inline double fit_decay_rate(const DynamicTrajectory& traj, const DeviationFields& dev) {
    const int K = traj.n_steps();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int cnt = 0;
    for (int k = 0; k <= K; ++k) {
        const double t = traj.times[k];
        if (t < 0.2 * traj.T || t > 0.5 * traj.T) continue;
        const double y = std::log(std::max(dev.phi[k], 1e-300));
        sx += t;
        sy += y;
        sxx += t * t;
        sxy += t * y;
        ++cnt;
    }
    if (cnt < 4) throw std::runtime_error("fit_decay_rate: window too small");
    const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    return -slope;
}

struct TurnpikeReport {
    StabilityConstants constants;
    double K_thm = 0.0;       // 4 * (physical integrand at t = 0 and t = T)
    double omega_fit = 0.0;
    bool converged = false;

    bool hypothesis_all_steps = false;
    int hypothesis_violations = 0;
    double domination_worst = 0.0;

    EstimateRecord est_314;          // integral inequality with the paper constant
    EstimateRecord est_A1_paper;     // windowed-average bound, paper constant
    EstimateRecord est_A1_empirical; // same with the tightest valid constant
    EstimateRecord est_35;           // windowed physical-scale bound
    EstimateRecord est_36;           // pointwise density bound
    EstimateRecord lemma_36;         // moment bound (∫V_k zeta)^2 <= (Q/4)∫zeta^2/mu
    EstimateRecord lemma_37;         // weighted energy inequality on sampled pairs
    double empirical_C = 0.0;

    DualityCheck duality;
    bool duality_ok = false;

    bool all_passed = false;
};

/// Run every stability estimate of the theory on a computed trajectory.
/// n_pairs random (t1, t2) pairs drive the integral-inequality checks.
inline TurnpikeReport assess_turnpike(const DynamicTrajectory& traj, const ErgodicSolution& stat,
                                      std::uint64_t seed = 0, int n_pairs = 100) {
    TurnpikeReport rep;
    rep.constants = make_stability_constants(stat);
    rep.converged = traj.converged;
    const auto dev = compute_phi(traj, stat);
    const auto r = rescale(stat);
    const int K = traj.n_steps();
    const int n = traj.grid->n_cells;
    const double rk = std::sqrt(traj.kappa);
    const double k14 = std::pow(traj.kappa, 0.25);
    const double hy = r.grid->spacing;
    const double dtr = dev.dt_rescaled;
    const double T_r = traj.T * rk;

    auto dom = check_domination(traj, stat, rep.constants.c_dom);
    rep.hypothesis_all_steps = dom.all_ok;
    rep.hypothesis_violations = dom.violations;
    rep.domination_worst = dom.worst_ratio;

    rep.K_thm = 4.0 * (dev.phi_physical.front() + dev.phi_physical.back());
    rep.omega_fit = fit_decay_rate(traj, dev);

    // trapezoid prefix of Phi in rescaled time
    std::vector<double> prefix(K + 1, 0.0);
    for (int k = 1; k <= K; ++k)
        prefix[k] = prefix[k - 1] + 0.5 * dtr * (dev.phi[k] + dev.phi[k - 1]);
    const double phimax = *std::max_element(dev.phi.begin(), dev.phi.end());
    const double slack = 1e-10 * std::max(phimax, 1e-300) * std::max(T_r, 1.0);

    // (3.14) on random pairs with the paper constant
    {
        const double Cpair =
            4.0 * (rep.constants.C_P + 1.0 / rep.constants.C_P + 1.0 / rep.constants.Q) * k14;
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<int> pick(0, K);
        EstimateRecord& e = rep.est_314;
        e.worst_margin = std::numeric_limits<double>::infinity();
        while (e.checked < n_pairs) {
            int i = pick(rng), j = pick(rng);
            if (i == j) continue;
            if (i > j) std::swap(i, j);
            const double lhs = prefix[j] - prefix[i];
            const double bound = Cpair * (dev.phi[i] + dev.phi[j]);
            ++e.checked;
            if (lhs > bound + slack) ++e.failed;
            e.worst_margin = std::min(e.worst_margin,
                                      (bound - lhs) / std::max(bound, 1e-300));
        }
        e.passed = e.failed == 0;
    }

    // Lemma A.1 windowed bound, paper constant (window set empty when T_r < 8C)
    {
        const double C_A1 =
            4.0 * (rep.constants.C_P + 1.0 / rep.constants.C_P + 1.0 / rep.constants.Q) * k14;
        auto d = decay_from_integral_inequality(dev.phi, dtr, C_A1, seed);
        EstimateRecord& e = rep.est_A1_paper;
        e.checked = static_cast<long>(d.window_t.size());
        e.applicable = !d.window_t.empty();
        e.passed = d.hypothesis_ok && d.bounds_ok;
        e.note = e.applicable ? "" : "window 4C exceeds the rescaled horizon";
        rep.empirical_C = d.worst_pair_ratio;
    }

    // Lemma A.1 with the tightest constant the samples allow
    {
        EstimateRecord& e = rep.est_A1_empirical;
        const double C_emp = rep.empirical_C * (1.0 + 1e-9);
        if (!(C_emp > 0.0) || T_r < 8.0 * C_emp) {
            e.applicable = false;
            e.note = "rescaled horizon below 8 C_emp";
        } else {
            auto d = decay_from_integral_inequality(dev.phi, dtr, C_emp, seed);
            e.checked = static_cast<long>(d.window_t.size());
            e.passed = d.hypothesis_ok && d.bounds_ok;
            double wm = std::numeric_limits<double>::infinity();
            for (size_t i = 0; i < d.window_t.size(); ++i)
                wm = std::min(wm, (d.window_bound[i] - d.window_avg[i]) /
                                      std::max(d.window_bound[i], 1e-300));
            e.worst_margin = wm;
        }
    }

    // (3.5): ∫_t^{t+C kappa^{-1/4}} [physical integrand] <= K (e^{-wt} + e^{-w(T-t)})
    {
        EstimateRecord& e = rep.est_35;
        const double W = rep.constants.C_turnpike * std::pow(traj.kappa, -0.25);
        if (W > traj.T) {
            e.applicable = false;
            e.note = "window C kappa^{-1/4} exceeds the horizon";
        } else {
            e.worst_margin = std::numeric_limits<double>::infinity();
            for (int k = 0; k <= K; ++k) {
                const double t = traj.times[k];
                if (t + W > traj.T + 1e-12) break;
                // physical integrand integrated over [t, t+W] equals the
                // rescaled Phi integrated over the matching rescaled window
                const double t2r = (t + W) * rk;
                const int j = std::min(static_cast<int>(t2r / dtr), K - 1);
                const double frac = t2r - j * dtr;
                const double phij =
                    dev.phi[j] + (dev.phi[j + 1] - dev.phi[j]) * (frac / dtr);
                const double lhs = (prefix[j] + 0.5 * frac * (dev.phi[j] + phij)) - prefix[k];
                const double bound = rep.K_thm / rk *
                                     (std::exp(-rep.constants.omega * t) +
                                      std::exp(-rep.constants.omega * (traj.T - t)));
                ++e.checked;
                if (lhs > bound + slack) ++e.failed;
                e.worst_margin = std::min(e.worst_margin,
                                          (bound - lhs) / std::max(bound, 1e-300));
            }
            e.passed = e.failed == 0;
        }
    }

    // (3.6): pointwise-in-time density bound with the derived constant
    {
        EstimateRecord& e = rep.est_36;
        e.worst_margin = std::numeric_limits<double>::infinity();
        const double pref = 2.0 * rep.K_thm / rep.constants.Q *
                            (rep.constants.C_turnpike * k14 + 1.0);
        for (int k = 0; k <= K; ++k) {
            const double Ephys = hy * kahan_accumulate(n, [&](int i) {
                                     return dev.zeta[k][i] * dev.zeta[k][i] / r.mu[i];
                                 });
            const double t = traj.times[k];
            const double bound = pref * (std::exp(-rep.constants.omega * t) +
                                         std::exp(-rep.constants.omega * (traj.T - t)));
            ++e.checked;
            if (Ephys > bound * (1.0 + 1e-9) + slack) ++e.failed;
            e.worst_margin =
                std::min(e.worst_margin, (bound - Ephys) / std::max(bound, 1e-300));
        }
        e.passed = e.failed == 0;
    }

    // Lemma 3.6 moment bound, exact discretely up to rounding
    {
        EstimateRecord& e = rep.lemma_36;
        e.worst_margin = std::numeric_limits<double>::infinity();
        for (int k = 0; k <= K; ++k) {
            const double mom = hy * kahan_accumulate(n, [&](int i) {
                                   return potential_V_rescaled(r.grid->x[i], traj.kappa) *
                                          dev.zeta[k][i];
                               });
            const double dens = hy * kahan_accumulate(n, [&](int i) {
                                    return dev.zeta[k][i] * dev.zeta[k][i] / r.mu[i];
                                });
            const double lhs = mom * mom;
            const double bound = 0.25 * dev.Q * dens;
            ++e.checked;
            if (lhs > bound * (1.0 + 1e-9) + 1e-300) ++e.failed;
            e.worst_margin =
                std::min(e.worst_margin, (bound - lhs) / std::max(bound, 1e-300));
        }
        e.passed = e.failed == 0;
    }

    // Lemma 3.7 energy inequality on random pairs, in the derivable form
    // (1/C_P) ∫ E dt + E(t2) <= E(t1) + kappa^{1/2} (C_P/Q) ∫∫ v_x^2 mu-bar,
    // allowing a discretization slack proportional to (dt + h^2) * scale.
    {
        EstimateRecord& e = rep.lemma_37;
        std::vector<double> E(K + 1), S(K + 1);
        for (int k = 0; k <= K; ++k) {
            E[k] = hy * kahan_accumulate(n, [&](int i) {
                       return dev.zeta[k][i] * dev.zeta[k][i] / r.mu[i];
                   });
            const auto vx = diff_neumann(dev.v[k]);
            S[k] = hy * kahan_accumulate(n, [&](int i) { return r.mu[i] * vx[i] * vx[i]; });
        }
        std::vector<double> pe(K + 1, 0.0), ps(K + 1, 0.0);
        for (int k = 1; k <= K; ++k) {
            pe[k] = pe[k - 1] + 0.5 * dtr * (E[k] + E[k - 1]);
            ps[k] = ps[k - 1] + 0.5 * dtr * (S[k] + S[k - 1]);
        }
        const double Emax = *std::max_element(E.begin(), E.end());
        const double Smax = *std::max_element(S.begin(), S.end());
        const double tol37 =
            10.0 * (dtr + hy * hy) * std::max({Emax, Smax, 1e-300}) * std::max(T_r, 1.0);
        std::mt19937_64 rng(seed + 1);
        std::uniform_int_distribution<int> pick(0, K);
        e.worst_margin = std::numeric_limits<double>::infinity();
        while (e.checked < n_pairs) {
            int i = pick(rng), j = pick(rng);
            if (i == j) continue;
            if (i > j) std::swap(i, j);
            const double lhs = (pe[j] - pe[i]) / rep.constants.C_P + E[j];
            const double bound =
                E[i] + rk * rep.constants.C_P / rep.constants.Q * (ps[j] - ps[i]);
            ++e.checked;
            if (lhs > bound + tol37) ++e.failed;
            e.worst_margin = std::min(e.worst_margin,
                                      (bound + tol37 - lhs) / std::max(bound + tol37, 1e-300));
        }
        e.passed = e.failed == 0;
    }

    rep.duality = duality_residual(traj, stat, dev);
    rep.duality_ok = rep.duality.max_residual <=
                     10.0 * rep.duality.tol_basis * std::max(rep.duality.scale, 1e-300);

    rep.all_passed = rep.hypothesis_all_steps && rep.est_314.passed &&
                     (!rep.est_A1_paper.applicable || rep.est_A1_paper.passed) &&
                     (!rep.est_A1_empirical.applicable || rep.est_A1_empirical.passed) &&
                     (!rep.est_35.applicable || rep.est_35.passed) && rep.est_36.passed &&
                     rep.lemma_36.passed && rep.lemma_37.passed && rep.duality_ok &&
                     rep.omega_fit > 0.0 && rep.converged;
    return rep;
}

} // namespace kmfg
