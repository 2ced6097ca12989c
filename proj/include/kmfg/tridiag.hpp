#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kmfg {

/// General tridiagonal system; lower/upper have n-1 entries.
struct Tridiag {
    std::vector<double> lower, diag, upper;
    int size() const { return static_cast<int>(diag.size()); }
};

/// Thomas algorithm. pivot_floor > 0 replaces (near-)zero pivots, which is the
/// standard trick for inverse iteration with a shift at an eigenvalue.
inline std::vector<double> thomas_solve(const Tridiag& m, std::span<const double> rhs,
                                        double pivot_floor = 0.0) {
    const int n = m.size();
    if (n == 0 || static_cast<int>(rhs.size()) != n)
        throw std::invalid_argument("thomas_solve: size mismatch");
    std::vector<double> c(n, 0.0), d(n);
    auto guard = [&](double beta) {
        if (beta == 0.0 || std::abs(beta) < pivot_floor) {
            if (pivot_floor <= 0.0) throw std::runtime_error("thomas_solve: zero pivot");
            return beta < 0.0 ? -pivot_floor : pivot_floor;
        }
        return beta;
    };
    double beta = guard(m.diag[0]);
    if (n > 1) c[0] = m.upper[0] / beta;
    d[0] = rhs[0] / beta;
    for (int i = 1; i < n; ++i) {
        beta = guard(m.diag[i] - m.lower[i - 1] * c[i - 1]);
        if (i < n - 1) c[i] = m.upper[i] / beta;
        d[i] = (rhs[i] - m.lower[i - 1] * d[i - 1]) / beta;
    }
    for (int i = n - 2; i >= 0; --i) d[i] -= c[i] * d[i + 1];
    return d;
}

/// Symmetric tridiagonal operator.
struct SymTridiag {
    std::vector<double> diag; // n
    std::vector<double> off;  // n-1
    int size() const { return static_cast<int>(diag.size()); }

    std::vector<double> apply(std::span<const double> v) const {
        const int n = size();
        std::vector<double> w(n);
        for (int i = 0; i < n; ++i) {
            double s = diag[i] * v[i];
            if (i > 0) s += off[i - 1] * v[i - 1];
            if (i < n - 1) s += off[i] * v[i + 1];
            w[i] = s;
        }
        return w;
    }

    double inf_norm() const {
        double m = 0.0;
        const int n = size();
        for (int i = 0; i < n; ++i) {
            double s = std::abs(diag[i]);
            if (i > 0) s += std::abs(off[i - 1]);
            if (i < n - 1) s += std::abs(off[i]);
            m = std::max(m, s);
        }
        return m;
    }

    Tridiag shifted(double sigma) const {
        Tridiag t;
        t.lower = off;
        t.upper = off;
        t.diag = diag;
        for (double& d : t.diag) d -= sigma;
        return t;
    }
};

/// Number of eigenvalues strictly below sigma (Sturm count via LDL^T).
/// An exactly-zero pivot means sigma is an eigenvalue of a leading minor; it
/// counts as negative, otherwise the count loses monotonicity at such sigma.
inline int eigenvalues_below(const SymTridiag& t, double sigma) {
    const int n = t.size();
    int count = 0;
    double d = t.diag[0] - sigma;
    if (d == 0.0) d = -std::numeric_limits<double>::min();
    if (d < 0.0) ++count;
    for (int i = 1; i < n; ++i) {
        d = (t.diag[i] - sigma) - t.off[i - 1] * t.off[i - 1] / d;
        if (d == 0.0) d = -std::numeric_limits<double>::min();
        if (d < 0.0) ++count;
    }
    return count;
}

inline std::pair<double, double> gershgorin_bounds(const SymTridiag& t) {
    const int n = t.size();
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int i = 0; i < n; ++i) {
        double r = 0.0;
        if (i > 0) r += std::abs(t.off[i - 1]);
        if (i < n - 1) r += std::abs(t.off[i]);
        lo = std::min(lo, t.diag[i] - r);
        hi = std::max(hi, t.diag[i] + r);
    }
    return {lo, hi};
}

/// Bracket of the k-th smallest eigenvalue (0-based) by Sturm bisection,
/// narrowed until the midpoint is no longer representable.
inline std::pair<double, double> kth_eigenvalue_bracket(const SymTridiag& t, int k, double lo,
                                                        double hi) {
    if (!(lo <= hi)) throw std::invalid_argument("kth_eigenvalue_bracket: empty bracket");
    double span = std::max(hi - lo, 1e-30);
    while (eigenvalues_below(t, lo) > k) lo -= span;
    while (eigenvalues_below(t, hi) < k + 1) hi += span;
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (eigenvalues_below(t, mid) >= k + 1)
            hi = mid;
        else
            lo = mid;
    }
    return {lo, hi};
}

inline double kth_eigenvalue(const SymTridiag& t, int k, double lo, double hi) {
    auto [a, b] = kth_eigenvalue_bracket(t, k, lo, hi);
    return 0.5 * (a + b);
}

struct EigenPair {
    double value = 0.0;
    std::vector<double> vector; // l2-normalized
    double residual = 0.0;      // ||A v - value v||_inf
    int iterations = 0;
};

inline void normalize_l2(std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    s = std::sqrt(s);
    if (s == 0.0) throw std::runtime_error("normalize_l2: zero vector");
    for (double& x : v) x /= s;
}

/// Ground eigenpair of a symmetric tridiagonal operator with nonpositive
/// off-diagonals: Sturm bisection pins lambda_0 to machine precision, then
/// inverse iteration runs with a fixed shift strictly below it. That keeps
/// t - sigma I an M-matrix, so each Thomas sweep maps positive vectors to
/// positive vectors without cancellation and the iterate cannot lose
/// positivity even where the eigenvector underflows toward the rounding floor.
/// rel_tol is measured against the operator inf-norm. With componentwise_tail
/// the iteration continues past global convergence until log|v_i| is stable at
/// every node; positive ground states spanning hundreds of decades need this
/// because excited-mode contamination dies off only geometrically in the far
/// tail, where the state is many orders below the l2-normalized bulk.
inline EigenPair ground_eigenpair(const SymTridiag& t, std::span<const double> start,
                                  double rel_tol = 1e-12, bool componentwise_tail = false,
                                  int max_iter = 80) {
    const int n = t.size();
    if (static_cast<int>(start.size()) != n)
        throw std::invalid_argument("ground_eigenpair: start size mismatch");
    const double scale = std::max(t.inf_norm(), 1e-300);
    const double tol = rel_tol * scale;

    auto [glo, ghi] = gershgorin_bounds(t);
    auto [blo, bhi] = kth_eigenvalue_bracket(t, 0, glo, ghi);
    const double shift = blo - std::max(4.0 * (bhi - blo), 1e-13 * scale);

    EigenPair out;
    out.vector.assign(start.begin(), start.end());
    normalize_l2(out.vector);
    std::vector<double> prev;

    for (int it = 0; it < max_iter; ++it) {
        prev = out.vector;
        out.vector = thomas_solve(t.shifted(shift), out.vector);
        normalize_l2(out.vector);
        const auto Av = t.apply(out.vector);
        double rq = 0.0;
        for (int i = 0; i < n; ++i) rq += Av[i] * out.vector[i];
        double res = 0.0;
        for (int i = 0; i < n; ++i) res = std::max(res, std::abs(Av[i] - rq * out.vector[i]));
        out.value = rq;
        out.residual = res;
        out.iterations = it + 1;
        if (it >= 1 && res <= tol) {
            if (!componentwise_tail) return out;
            double dlog = 0.0;
            bool signs_ok = true;
            for (int i = 0; i < n; ++i) {
                if (out.vector[i] == 0.0 || prev[i] == 0.0 ||
                    (out.vector[i] > 0.0) != (prev[i] > 0.0)) {
                    signs_ok = false;
                    break;
                }
                dlog = std::max(dlog, std::abs(std::log(std::abs(out.vector[i])) -
                                               std::log(std::abs(prev[i]))));
            }
            if (signs_ok && dlog <= 1e-11) return out;
        }
    }
    throw std::runtime_error("ground_eigenpair: no convergence after " +
                             std::to_string(max_iter) + " iterations, residual " +
                             std::to_string(out.residual));
}

} // namespace kmfg
