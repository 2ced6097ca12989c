#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "kmfg/grid.hpp"

using namespace kmfg;

namespace {

std::mt19937_64 rng(20240517ull);

ScalarField random_field(const GridPtr& g, Parity p) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    ScalarField f(g, p);
    const int n = g->n_cells;
    for (int i = n / 2; i < n; ++i) {
        const double v = dist(rng);
        f[i] = v;
        f[n - 1 - i] = (p == Parity::Odd) ? -v : v;
    }
    if (p == Parity::None)
        for (int i = 0; i < n; ++i) f[i] = dist(rng);
    return f;
}

} // namespace

TEST_CASE("make_grid basic geometry") {
    auto g = make_grid(kPi, 8);
    REQUIRE(g->n_cells == 8);
    CHECK(g->spacing == Catch::Approx(kPi / 4.0));
    // nodes at +-pi/8 * {1,3,5,7}
    CHECK(g->x[4] == Catch::Approx(kPi / 8.0));
    CHECK(g->x[7] == Catch::Approx(7.0 * kPi / 8.0));
    for (int i = 0; i < 8; ++i) CHECK(g->x[i] == -g->x[7 - i]); // exact mirror

    auto g2 = make_grid(10.0 * kPi, 1024);
    CHECK(g2->spacing == Catch::Approx(0.0614).margin(5e-5));

    // quadrature weights sum to 2L
    ScalarField one(g2, std::vector<double>(1024, 1.0), Parity::Even);
    CHECK(integrate(one) == Catch::Approx(20.0 * kPi).epsilon(1e-14));
}

TEST_CASE("make_grid rejects bad input") {
    CHECK_THROWS_AS(make_grid(kPi, 7), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(kPi, 6), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(-1.0, 64), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(0.0, 64), std::invalid_argument);
}

TEST_CASE("spacing uniform to machine precision") {
    auto g = make_grid(kPi, 512);
    for (int i = 1; i < g->n_cells; ++i)
        CHECK(std::abs((g->x[i] - g->x[i - 1]) - g->spacing) < 1e-14);
}

TEST_CASE("midpoint quadrature") {
    auto g = make_grid(kPi, 1024);
    auto c = ScalarField::from_function(g, [](double x) { return std::cos(x); }, Parity::Even);
    CHECK(std::abs(integrate(c)) < 1e-12);
    auto x2 = ScalarField::from_function(g, [](double x) { return x * x; }, Parity::Even);
    const double exact = 2.0 * kPi * kPi * kPi / 3.0;
    CHECK(integrate(x2) == Catch::Approx(exact).epsilon(1e-3));
}

TEST_CASE("diff_neumann on knowns") {
    auto g = make_grid(kPi, 2048);
    auto c = ScalarField::from_function(g, [](double) { return 3.7; }, Parity::Even);
    auto dc = diff_neumann(c);
    CHECK(sup_norm(dc.values) == 0.0);

    auto f = ScalarField::from_function(g, [](double x) { return std::cos(x); }, Parity::Even);
    auto df = diff_neumann(f);
    CHECK(df.parity == Parity::Odd);
    double err = 0.0;
    for (int i = 0; i < g->n_cells; ++i)
        err = std::max(err, std::abs(df[i] + std::sin(g->x[i])));
    CHECK(err < 1e-5);

    auto q = ScalarField::from_function(g, [](double x) { return x * x; }, Parity::Even);
    auto dq = diff_neumann(q);
    for (int i = 1; i + 1 < g->n_cells; ++i)
        CHECK(dq[i] == Catch::Approx(2.0 * g->x[i]).margin(1e-10));
    // boundary cells follow the even reflection
    const double h = g->spacing;
    CHECK(dq[0] == Catch::Approx((q[1] - q[0]) / (2.0 * h)).margin(1e-12));
    CHECK(dq[g->n_cells - 1] ==
          Catch::Approx((q[g->n_cells - 1] - q[g->n_cells - 2]) / (2.0 * h)).margin(1e-12));
}

TEST_CASE("second derivative of cos") {
    auto g = make_grid(kPi, 2048);
    auto f = ScalarField::from_function(g, [](double x) { return std::cos(x); }, Parity::Even);
    auto ddf = second_diff_neumann(f);
    double err = 0.0;
    for (int i = 1; i + 1 < g->n_cells; ++i)
        err = std::max(err, std::abs(ddf[i] + f[i]));
    CHECK(err < 1e-5);
}

TEST_CASE("potential values and sandwich") {
    CHECK(potential_V(0.0) == 0.0);
    CHECK(potential_V(kPi) == Catch::Approx(2.0).epsilon(1e-14));
    const double vr = potential_V_rescaled(1.0, 16.0);
    CHECK(vr == Catch::Approx(4.0 * (1.0 - std::cos(0.5))).epsilon(1e-14));
    CHECK(vr >= 1.0 / 6.0);
    CHECK(vr <= 0.5);

    auto g = make_grid(kPi, 512);
    auto V = eval_potential(g, false, 0.0);
    CHECK(V.parity == Parity::Even);
    for (int i = 0; i < g->n_cells; ++i) {
        const double x2 = g->x[i] * g->x[i];
        CHECK(V[i] >= x2 / 6.0 - 1e-15);
        CHECK(V[i] <= x2 / 2.0 + 1e-15);
    }
    const double kap = 1e4;
    auto gr = make_grid(kPi * std::pow(kap, 0.25), 512);
    auto Vr = eval_potential(gr, true, kap);
    for (int i = 0; i < gr->n_cells; ++i) {
        const double x2 = gr->x[i] * gr->x[i];
        CHECK(Vr[i] >= x2 / 6.0 - 1e-12 * x2);
        CHECK(Vr[i] <= x2 / 2.0 + 1e-12 * x2);
    }
    CHECK_THROWS_AS(eval_potential(g, true, 0.5), std::invalid_argument);
}

TEST_CASE("even-odd quadrature and divergence identities") {
    auto g = make_grid(kPi, 256);
    for (int trial = 0; trial < 20; ++trial) {
        auto fe = random_field(g, Parity::Even);
        auto fo = random_field(g, Parity::Odd);
        CHECK(std::abs(integrate_product(fe, fo)) < 1e-12);

        // zero-flux divergence theorem for fields with matching boundary values
        auto d = diff_neumann(fe);
        CHECK(std::abs(integrate(d)) < 1e-12);

        // for arbitrary fields the discrete identity is ∫ f' = f_last - f_first
        auto fa = random_field(g, Parity::None);
        auto da = diff_neumann(fa);
        CHECK(integrate(da) ==
              Catch::Approx(fa[g->n_cells - 1] - fa[0]).margin(1e-12));
    }
}

TEST_CASE("diff of even field is odd and small at the boundary") {
    auto g = make_grid(kPi, 512);
    auto f = ScalarField::from_function(
        g, [](double x) { return std::exp(-x * x) + 0.3 * std::cos(2 * x); }, Parity::Even);
    auto d = diff_neumann(f);
    const int n = g->n_cells;
    for (int i = 0; i < n / 2; ++i) CHECK(d[i] == Catch::Approx(-d[n - 1 - i]).margin(1e-14));
    const double scale = sup_norm(d.values);
    CHECK(std::abs(d[0]) <= 2.0 * g->spacing * std::max(scale, 1.0));
    CHECK(std::abs(d[n - 1]) <= 2.0 * g->spacing * std::max(scale, 1.0));
}
