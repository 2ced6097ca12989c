#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "kmfg/linearized.hpp"

using namespace kmfg;

namespace {

double fprime_fd(double a, double kappa, const GridPtr& g, double ha = 1e-4) {
    const double Fp = eval_F(solve_ergodic(a + ha, kappa, g));
    const double Fm = eval_F(solve_ergodic(a - ha, kappa, g));
    return (Fp - Fm) / (2.0 * ha);
}

} // namespace

TEST_CASE("incoherent linearization is explicit") {
    const double kap = 100.0;
    auto g = make_grid(kPi, 4096);
    auto lin = solve_linearized(solve_ergodic(1.0, kap, g));

    CHECK(lin.lambda_prime == Catch::Approx(-kap).epsilon(1e-12));
    double verr = 0.0;
    for (int i = 0; i < g->n_cells; ++i)
        verr = std::max(verr, std::abs(lin.v[i] - kap * (std::cos(g->x[i]) - 1.0)));
    CHECK(verr < 1e-6 * kap);

    CHECK(lin.fprime_quadratic == Catch::Approx(kap / 2.0).epsilon(0.005));
    CHECK(lin.fprime_bilinear == Catch::Approx(kap / 2.0).epsilon(0.005));
}

TEST_CASE("critical slope at kappa = 16") {
    auto g = make_grid(kPi, 2048);
    auto lin = solve_linearized(solve_ergodic(1.0, 16.0, g));
    auto [q, b] = fprime_pair(lin);
    CHECK(q == Catch::Approx(8.0).epsilon(0.005));
    CHECK(b == Catch::Approx(8.0).epsilon(0.005));
}

TEST_CASE("two representation formulas agree off the fixed point") {
    auto g = make_grid(kPi, 2048);
    auto lin = solve_linearized(solve_ergodic(0.5, 400.0, g));
    CHECK(lin.fprime_quadratic >= 0.0);
    CHECK(std::abs(lin.fprime_quadratic - lin.fprime_bilinear) <=
          1e-4 * std::max(1.0, lin.fprime_quadratic));
    // lambda' identity against the finite difference of the HJB constant 2*lambda
    const double ha = 1e-4;
    const double dl = (2.0 * solve_ergodic(0.5 + ha, 400.0, g).lambda -
                       2.0 * solve_ergodic(0.5 - ha, 400.0, g).lambda) /
                      (2.0 * ha);
    CHECK(dl == Catch::Approx(lin.lambda_prime).epsilon(1e-3));
}

TEST_CASE("derivative formulas match the finite-difference oracle") {
    auto g = make_grid(kPi, 2048);
    for (double a : {0.2, 0.7}) {
        auto lin = solve_linearized(solve_ergodic(a, 100.0, g));
        const double fd = fprime_fd(a, 100.0, g);
        CHECK(lin.fprime_quadratic == Catch::Approx(fd).epsilon(1e-3));
        CHECK(lin.fprime_bilinear == Catch::Approx(fd).epsilon(1e-3));
    }
}

TEST_CASE("structure of v") {
    auto g = make_grid(kPi, 2048);
    auto lin = solve_linearized(solve_ergodic(0.3, 400.0, g));
    const int n = g->n_cells;
    CHECK(lin.v.parity == Parity::Even);
    CHECK(max_asymmetry(lin.v) < 1e-10 * (1.0 + sup_norm(lin.v.values)));
    // v(0) = 0 at the half-cell level: the two central nodes carry O(h) values
    CHECK(std::abs(lin.v[n / 2]) <= std::abs(lin.vprime[n / 2]) * g->spacing);
    // Neumann consistency of the quadrature: v' at the boundary cell is O(h)
    // relative to the source scale kappa (the half-cell value (h/2)(lambda'+kappa V))
    CHECK(std::abs(lin.vprime[n - 1]) <= 1.5 * g->spacing * lin.base.kappa);
}

TEST_CASE("corrector vanishes at the incoherent point") {
    auto g = make_grid(kPi, 1024);
    auto c = solve_corrector(solve_ergodic(1.0, 100.0, g));
    CHECK(c.sup_z < 1e-12);
    CHECK(c.sup_zprime < 1e-12);
}

TEST_CASE("corrector in the near-incoherent regime") {
    const double kap = 100.0, tau = 0.01;
    auto g = make_grid(kPi, 2048);
    auto base = solve_ergodic(1.0 - tau / kap, kap, g);
    auto c = solve_corrector(base);

    // |z'|, |z| <= C sqrt(tau); the measured constant is far below 1
    CHECK(c.sup_zprime <= std::sqrt(tau));
    CHECK(c.sup_z <= std::sqrt(tau));

    // reconstruction v = kappa (cos x - 1 + z)
    auto lin = solve_linearized(base);
    double rerr = 0.0;
    for (int i = 0; i < g->n_cells; ++i) {
        const double recon = kap * (std::cos(g->x[i]) - 1.0 + c.z[i]);
        rerr = std::max(rerr, std::abs(recon - lin.v[i]));
    }
    CHECK(rerr < 1e-6 * kap);

    // steep region: F' >= kappa/4 right next to a = 1
    CHECK(lin.fprime_quadratic >= kap / 4.0);
}

TEST_CASE("near-incoherent flatness of the density and drift") {
    // sup |m - 1/2pi| <= 2 sqrt(C_m tau) and sup |u'| <= 8 C_u tau with one
    // witness constant per bound across the sweep. Measured: the density gap is
    // ~0.16 tau and the drift ~1.0 tau, both linear, so the constants below
    // carry at least 2x headroom at every sampled tau.
    const double C_m = 0.05, C_u = 0.25;
    auto g = make_grid(kPi, 1024);
    for (double kap : {100.0, 400.0}) {
        for (double tau : {0.01, 0.05, 0.1, 0.3}) {
            auto s = solve_ergodic(1.0 - tau / kap, kap, g);
            double dm = 0.0;
            for (int i = 0; i < g->n_cells; ++i)
                dm = std::max(dm, std::abs(s.m[i] - 1.0 / (2.0 * kPi)));
            CHECK(dm <= 2.0 * std::sqrt(C_m * tau));
            const auto du = diff_neumann(s.u);
            CHECK(sup_norm(du.values) <= 8.0 * C_u * tau);
        }
    }
}

TEST_CASE("corrector precondition") {
    auto g = make_grid(kPi, 256);
    CHECK_THROWS_AS(solve_corrector(solve_ergodic(0.5, 100.0, g)), std::invalid_argument);
    CHECK_THROWS_AS(solve_corrector(solve_ergodic(1.0, 100.0, g), 2.0), std::invalid_argument);
}

TEST_CASE("identity lambda' = -kappa F across a sweep") {
    auto g = make_grid(kPi, 1024);
    for (int j = 0; j <= 20; ++j) {
        const double a = j / 20.0;
        auto base = solve_ergodic(a, 100.0, g);
        auto lin = solve_linearized(base);
        CHECK(std::abs(lin.lambda_prime + 100.0 * eval_F(base)) <= 1e-8 * 100.0);
    }
}
