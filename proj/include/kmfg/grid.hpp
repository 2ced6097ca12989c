#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace kmfg {

inline constexpr double kPi = 3.14159265358979323846;

enum class Parity { Even, Odd, None };

/// Uniform cell-centered mesh on [-L, L] with midpoint quadrature.
/// Nodes sit at cell centers; n_cells must be even so that the node set is
/// exactly symmetric about 0 (x[i] == -x[n-1-i] in floating point).
struct Grid1D {
    double half_width = 0.0;
    int n_cells = 0;
    double spacing = 0.0;
    std::vector<double> x;
};

using GridPtr = std::shared_ptr<const Grid1D>;

inline GridPtr make_grid(double half_width, int n_cells) {
    if (!(half_width > 0.0))
        throw std::invalid_argument("make_grid: half_width must be positive");
    if (n_cells < 8 || n_cells % 2 != 0)
        throw std::invalid_argument("make_grid: n_cells must be even and >= 8");
    Grid1D g;
    g.half_width = half_width;
    g.n_cells = n_cells;
    g.spacing = 2.0 * half_width / n_cells;
    g.x.resize(n_cells);
    const int half = n_cells / 2;
    for (int i = half; i < n_cells; ++i) {
        g.x[i] = (i - half + 0.5) * g.spacing;
        g.x[n_cells - 1 - i] = -g.x[i];
    }
    return std::make_shared<const Grid1D>(std::move(g));
}

inline bool same_grid(const Grid1D& a, const Grid1D& b) {
    return a.n_cells == b.n_cells && a.half_width == b.half_width;
}

/// Grid function with values at cell centers.
struct ScalarField {
    GridPtr grid;
    std::vector<double> values;
    Parity parity = Parity::None;

    ScalarField() = default;
    explicit ScalarField(GridPtr g, Parity p = Parity::None)
        : grid(std::move(g)), values(grid->n_cells, 0.0), parity(p) {}
    ScalarField(GridPtr g, std::vector<double> v, Parity p = Parity::None)
        : grid(std::move(g)), values(std::move(v)), parity(p) {
        if (static_cast<int>(values.size()) != grid->n_cells)
            throw std::invalid_argument("ScalarField: value count does not match grid");
    }

    int size() const { return grid->n_cells; }
    double& operator[](int i) { return values[i]; }
    double operator[](int i) const { return values[i]; }

    template <class F>
    static ScalarField from_function(GridPtr g, F f, Parity p = Parity::None) {
        ScalarField out(std::move(g), p);
        for (int i = 0; i < out.size(); ++i) out.values[i] = f(out.grid->x[i]);
        return out;
    }
};

/// Compensated (Kahan) summation; keeps quadrature drift at rounding level.
inline double kahan_sum(std::span<const double> v) {
    double s = 0.0, c = 0.0;
    for (double x : v) {
        const double y = x - c;
        const double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return s;
}

template <class F>
inline double kahan_accumulate(int n, F term) {
    double s = 0.0, c = 0.0;
    for (int i = 0; i < n; ++i) {
        const double y = term(i) - c;
        const double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return s;
}

/// Midpoint-rule integral over [-L, L]; exact for constants.
inline double integrate(const ScalarField& f) {
    return f.grid->spacing * kahan_sum(f.values);
}

/// Midpoint-rule integral of a pointwise product.
inline double integrate_product(const ScalarField& f, const ScalarField& g) {
    if (!same_grid(*f.grid, *g.grid))
        throw std::invalid_argument("integrate_product: grid mismatch");
    return f.grid->spacing *
           kahan_accumulate(f.size(), [&](int i) { return f.values[i] * g.values[i]; });
}

inline Parity flip(Parity p) {
    if (p == Parity::Even) return Parity::Odd;
    if (p == Parity::Odd) return Parity::Even;
    return Parity::None;
}

/// Centered first derivative with mirrored ghost cells (zero normal derivative).
/// Output parity is flipped. At the two boundary cells the stencil is the
/// derivative of the even reflection, O(h) for fields with nonzero boundary slope.
inline ScalarField diff_neumann(const ScalarField& f) {
    const int n = f.size();
    const double inv2h = 1.0 / (2.0 * f.grid->spacing);
    ScalarField d(f.grid, flip(f.parity));
    for (int i = 0; i < n; ++i) {
        const double fm = (i == 0) ? f.values[0] : f.values[i - 1];
        const double fp = (i == n - 1) ? f.values[n - 1] : f.values[i + 1];
        d.values[i] = (fp - fm) * inv2h;
    }
    return d;
}

/// Centered second derivative with mirrored ghost cells.
inline ScalarField second_diff_neumann(const ScalarField& f) {
    const int n = f.size();
    const double invh2 = 1.0 / (f.grid->spacing * f.grid->spacing);
    ScalarField d(f.grid, f.parity);
    for (int i = 0; i < n; ++i) {
        const double fm = (i == 0) ? f.values[0] : f.values[i - 1];
        const double fp = (i == n - 1) ? f.values[n - 1] : f.values[i + 1];
        d.values[i] = (fm - 2.0 * f.values[i] + fp) * invh2;
    }
    return d;
}

/// V(x) = 1 - cos x, evaluated as 2 sin^2(x/2) to avoid cancellation near 0.
inline double potential_V(double x) {
    const double s = std::sin(0.5 * x);
    return 2.0 * s * s;
}

/// V_kappa(x) = sqrt(kappa) V(x kappa^{-1/4}) on the stretched domain.
inline double potential_V_rescaled(double x, double kappa) {
    return std::sqrt(kappa) * potential_V(x * std::pow(kappa, -0.25));
}

/// Interaction potential as a grid field; satisfies x^2/6 <= V <= x^2/2 nodewise.
inline ScalarField eval_potential(const GridPtr& grid, bool rescaled, double kappa) {
    if (rescaled && !(kappa >= 1.0))
        throw std::invalid_argument("eval_potential: rescaled form requires kappa >= 1");
    return ScalarField::from_function(
        grid,
        [&](double x) { return rescaled ? potential_V_rescaled(x, kappa) : potential_V(x); },
        Parity::Even);
}

inline double sup_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double max_asymmetry(const ScalarField& f) {
    const int n = f.size();
    double m = 0.0;
    for (int i = 0; i < n / 2; ++i)
        m = std::max(m, std::abs(f.values[i] - f.values[n - 1 - i]));
    return m;
}

} // namespace kmfg
