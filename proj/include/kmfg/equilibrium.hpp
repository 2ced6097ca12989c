#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ergodic.hpp"
#include "linearized.hpp"

namespace kmfg {

/// Interior width delta of the contraction-regime interval [0, 1-delta].
inline constexpr double kDelta = 0.05;
/// tau used for the steep-region probe F'(1 - tau/kappa).
inline constexpr double kTau0 = 0.5;

/// Sampled graph of a -> F_kappa(a) with the slope from the quadratic formula.
struct FMapTable {
    double kappa = 0.0;
    std::vector<double> a_samples;
    std::vector<double> F_values;
    std::vector<double> Fprime_values;
};

enum class FixedPointKind { Incoherent, SelfOrganizing };

struct FixedPoint {
    double a = 0.0;
    FixedPointKind kind = FixedPointKind::Incoherent;
};

struct FixedPointReport {
    double kappa = 0.0;
    std::vector<FixedPoint> fixed_points; // sorted by a; a = 1 always present
    std::vector<std::pair<double, double>> brackets;
    double contraction_bound = 0.0; // max F' over samples in [0, 1 - delta]
    double near_one_slope = 0.0;    // F'(1 - tau0/kappa)
    std::vector<std::pair<double, double>> steep_probe; // (tau, F'(1 - tau/kappa))
    std::optional<double> threshold_estimate;
    bool anomaly = false; // >1 sign change inside [0, 1 - tau0/kappa]
};

/// Sample F on a uniform a-grid over [0,1], extended to (1,2] by the mirror
/// identity F(2-a) = 2 - F(a), F'(2-a) = F'(a).
inline FMapTable sweep_fmap(double kappa, int n_samples, const GridPtr& grid) {
    if (n_samples < 11) throw std::invalid_argument("sweep_fmap: need at least 11 samples");
    FMapTable t;
    t.kappa = kappa;
    t.a_samples.reserve(2 * n_samples - 1);
    t.F_values.reserve(2 * n_samples - 1);
    t.Fprime_values.reserve(2 * n_samples - 1);
    for (int j = 0; j < n_samples; ++j) {
        const double a = static_cast<double>(j) / (n_samples - 1);
        try {
            auto lin = solve_linearized(solve_ergodic(a, kappa, grid));
            t.a_samples.push_back(a);
            t.F_values.push_back(eval_F(lin.base));
            t.Fprime_values.push_back(lin.fprime_quadratic);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("sweep_fmap at a=" + std::to_string(a) + ": " + e.what());
        }
    }
    for (int j = n_samples - 2; j >= 0; --j) {
        t.a_samples.push_back(2.0 - t.a_samples[j]);
        t.F_values.push_back(2.0 - t.F_values[j]);
        t.Fprime_values.push_back(t.Fprime_values[j]);
    }
    return t;
}

/// Locate the fixed points of F on [0,2]: sign changes of g(a) = F(a) - a from
/// the table are bracketed and refined by bisection with fresh solves down to
/// |g| <= 1e-10; a = 1 is verified directly; mirror points are added by
/// symmetry. More than one root strictly inside [0, 1 - tau0/kappa] raises the
/// anomaly flag instead of being dropped.
inline FixedPointReport find_fixed_points(const FMapTable& table, const GridPtr& grid) {
    if (table.a_samples.size() < 3 || table.a_samples.front() != 0.0)
        throw std::invalid_argument("find_fixed_points: malformed table");
    const double kappa = table.kappa;
    FixedPointReport rep;
    rep.kappa = kappa;

    auto gfun = [&](double a) { return eval_F(solve_ergodic(a, kappa, grid)) - a; };

    // brackets on [0, 1), excluding the exact root at a = 1
    const double a_hi_limit = 1.0 - 0.25 * kTau0 / kappa;
    std::vector<std::pair<double, double>> brackets;
    for (size_t j = 0; j + 1 < table.a_samples.size(); ++j) {
        const double a0 = table.a_samples[j], a1 = table.a_samples[j + 1];
        if (a1 > a_hi_limit) break;
        const double g0 = table.F_values[j] - a0, g1 = table.F_values[j + 1] - a1;
        if (g0 == 0.0) brackets.emplace_back(a0, a0);
        if ((g0 > 0.0 && g1 < 0.0) || (g0 < 0.0 && g1 > 0.0)) brackets.emplace_back(a0, a1);
    }

    std::vector<double> roots;
    for (auto [lo, hi] : brackets) {
        double glo = gfun(lo);
        double a_root = lo;
        if (lo != hi) {
            double ghi = gfun(hi);
            double mid = 0.5 * (lo + hi), gmid = glo;
            for (int it = 0; it < 200; ++it) {
                mid = 0.5 * (lo + hi);
                if (mid == lo || mid == hi) break;
                gmid = gfun(mid);
                if (std::abs(gmid) <= 1e-10) break;
                if ((glo > 0.0) == (gmid > 0.0)) {
                    lo = mid;
                    glo = gmid;
                } else {
                    hi = mid;
                    ghi = gmid;
                }
            }
            (void)ghi;
            if (std::abs(gmid) > 1e-10)
                throw std::runtime_error("find_fixed_points: bisection stalled at kappa=" +
                                         std::to_string(kappa));
            a_root = mid;
        }
        roots.push_back(a_root);
        rep.brackets.emplace_back(lo, hi);
    }

    int inside_flat = 0;
    for (double r : roots)
        if (r <= 1.0 - kTau0 / kappa) ++inside_flat;
    rep.anomaly = inside_flat > 1;

    for (double r : roots) rep.fixed_points.push_back({r, FixedPointKind::SelfOrganizing});

    // a = 1 is always a fixed point; verify instead of searching
    const double g1 = gfun(1.0);
    if (std::abs(g1) > 1e-10)
        throw std::runtime_error("find_fixed_points: F(1) - 1 = " + std::to_string(g1));
    rep.fixed_points.push_back({1.0, FixedPointKind::Incoherent});

    // mirror images of the self-organizing points
    for (double r : roots)
        rep.fixed_points.push_back({2.0 - r, FixedPointKind::SelfOrganizing});
    std::sort(rep.fixed_points.begin(), rep.fixed_points.end(),
              [](const FixedPoint& x, const FixedPoint& y) { return x.a < y.a; });

    double cmax = 0.0;
    for (size_t j = 0; j < table.a_samples.size(); ++j)
        if (table.a_samples[j] <= 1.0 - kDelta + 1e-12)
            cmax = std::max(cmax, table.Fprime_values[j]);
    rep.contraction_bound = cmax;

    for (double tau : {0.1, kTau0, 1.0}) {
        const double a_probe = 1.0 - tau / kappa;
        auto lin = solve_linearized(solve_ergodic(a_probe, kappa, grid));
        rep.steep_probe.emplace_back(tau, lin.fprime_quadratic);
        if (tau == kTau0) rep.near_one_slope = lin.fprime_quadratic;
    }
    return rep;
}

/// True when the report shows exactly the three-point structure {a-bar, 1, 2-a-bar}.
inline bool three_point_structure(const FixedPointReport& rep) {
    return rep.fixed_points.size() == 3 && !rep.anomaly &&
           rep.fixed_points[1].kind == FixedPointKind::Incoherent &&
           rep.fixed_points[0].kind == FixedPointKind::SelfOrganizing;
}

struct ThresholdScan {
    double kappa0_estimate = 0.0; // empirical; only the bound kappa0 > 4 is backed by theory
    std::vector<double> kappas;
    std::vector<int> n_fixed_points;
    std::vector<bool> anomalies;
    std::vector<FixedPointReport> reports;
};

/// Smallest sampled kappa above which every larger sample shows the clean
/// three-point structure with no anomaly. Purely empirical.
inline ThresholdScan estimate_threshold(std::vector<double> kappas, const GridPtr& grid,
                                        int n_samples = 41) {
    std::sort(kappas.begin(), kappas.end());
    if (kappas.size() < 2) throw std::invalid_argument("estimate_threshold: degenerate range");
    if (!(kappas.front() <= 4.0 && kappas.back() >= 100.0))
        throw std::invalid_argument("estimate_threshold: range must span [4, 100]");

    ThresholdScan scan;
    scan.kappas = kappas;
    std::vector<bool> ok;
    for (double k : kappas) {
        auto rep = find_fixed_points(sweep_fmap(k, n_samples, grid), grid);
        ok.push_back(three_point_structure(rep));
        scan.n_fixed_points.push_back(static_cast<int>(rep.fixed_points.size()));
        scan.anomalies.push_back(rep.anomaly);
        scan.reports.push_back(std::move(rep));
    }
    int first_stable = -1;
    for (int i = static_cast<int>(kappas.size()) - 1; i >= 0; --i) {
        if (!ok[i]) break;
        first_stable = i;
    }
    if (first_stable < 0) {
        std::string msg = "estimate_threshold: structure never stabilizes; counts:";
        for (size_t i = 0; i < kappas.size(); ++i)
            msg += " kappa=" + std::to_string(kappas[i]) + ":" +
                   std::to_string(scan.n_fixed_points[i]);
        throw std::runtime_error(msg);
    }
    scan.kappa0_estimate = kappas[first_stable];
    return scan;
}

} // namespace kmfg
