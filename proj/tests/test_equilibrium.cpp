#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "kmfg/equilibrium.hpp"

using namespace kmfg;

namespace {

// root of a = 1/(2 sqrt(kappa (1-a))), the Gaussian-asymptotic prediction of
// the self-organizing fixed point
double abar_asymptotic(double kappa) {
    double a = 0.0;
    for (int it = 0; it < 50; ++it) a = 1.0 / (2.0 * std::sqrt(kappa * (1.0 - a)));
    return a;
}

} // namespace

TEST_CASE("sweep holds the exact identities at a = 1") {
    auto g = make_grid(kPi, 1024);
    auto t = sweep_fmap(100.0, 21, g);
    REQUIRE(t.a_samples.size() == 41);

    const int j1 = 20; // a = 1
    CHECK(t.a_samples[j1] == 1.0);
    CHECK(t.F_values[j1] == Catch::Approx(1.0).margin(1e-12));
    CHECK(t.Fprime_values[j1] == Catch::Approx(50.0).epsilon(0.005));

    for (size_t j = 0; j + 1 < t.F_values.size(); ++j)
        CHECK(t.F_values[j + 1] >= t.F_values[j] - 1e-8);
    for (auto F : t.F_values) {
        CHECK(F >= 0.0);
        CHECK(F <= 2.0);
    }
    // mirror symmetry of the extended table
    const size_t m = t.a_samples.size();
    for (size_t j = 0; j < m; ++j) {
        CHECK(t.a_samples[j] == Catch::Approx(2.0 - t.a_samples[m - 1 - j]).margin(1e-14));
        CHECK(t.F_values[j] == Catch::Approx(2.0 - t.F_values[m - 1 - j]).margin(1e-8));
    }
}

TEST_CASE("sweep rejects too-few samples") {
    auto g = make_grid(kPi, 256);
    CHECK_THROWS_AS(sweep_fmap(100.0, 10, g), std::invalid_argument);
}

TEST_CASE("fixed points at kappa = 400") {
    auto g = make_grid(kPi, 1024);
    auto rep = find_fixed_points(sweep_fmap(400.0, 51, g), g);

    REQUIRE(rep.fixed_points.size() == 3);
    CHECK(three_point_structure(rep));
    const double abar = rep.fixed_points[0].a;
    CHECK(abar == Catch::Approx(abar_asymptotic(400.0)).epsilon(0.10));
    CHECK(rep.fixed_points[1].a == 1.0);
    CHECK(rep.fixed_points[2].a == Catch::Approx(2.0 - abar).margin(1e-12));

    // every reported point is a fixed point to 1e-10 under fresh evaluation
    for (const auto& fp : rep.fixed_points) {
        const double F = eval_F(solve_ergodic(fp.a, 400.0, g));
        CHECK(std::abs(F - fp.a) <= 1e-10);
    }
    CHECK_FALSE(rep.anomaly);

    // slope dichotomy: flat at the self-organizing point, steep next to a = 1
    CHECK(rep.contraction_bound < 1.0);
    CHECK(rep.near_one_slope >= 400.0 / 4.0);
}

TEST_CASE("exactly two fixed points in [0,1] at kappa = 100") {
    auto g = make_grid(kPi, 1024);
    auto rep = find_fixed_points(sweep_fmap(100.0, 41, g), g);
    int in_unit = 0;
    for (const auto& fp : rep.fixed_points)
        if (fp.a <= 1.0) ++in_unit;
    CHECK(in_unit == 2);
    CHECK(three_point_structure(rep));
}

TEST_CASE("below critical coupling only incoherence remains") {
    auto g = make_grid(kPi, 512);
    auto rep = find_fixed_points(sweep_fmap(1.0, 41, g), g);
    REQUIRE(rep.fixed_points.size() == 1);
    CHECK(rep.fixed_points[0].a == 1.0);
    CHECK_FALSE(rep.anomaly);
    // consistent with the local contraction F'(1) = kappa/2 < 1
    auto lin = solve_linearized(solve_ergodic(1.0, 1.0, g));
    CHECK(lin.fprime_quadratic == Catch::Approx(0.5).epsilon(0.005));
}

TEST_CASE("fixed point stable under grid refinement") {
    auto rep1 = find_fixed_points(sweep_fmap(400.0, 21, make_grid(kPi, 1024)), make_grid(kPi, 1024));
    auto rep2 = find_fixed_points(sweep_fmap(400.0, 21, make_grid(kPi, 2048)), make_grid(kPi, 2048));
    CHECK(std::abs(rep1.fixed_points[0].a - rep2.fixed_points[0].a) < 1e-6);
}

TEST_CASE("threshold scan") {
    auto g = make_grid(kPi, 512);
    auto scan = estimate_threshold({4.0, 8.0, 16.0, 32.0, 64.0, 128.0}, g, 21);
    CHECK(scan.kappa0_estimate >= 4.0);
    // stability of the structure above the estimate
    for (size_t i = 0; i < scan.kappas.size(); ++i)
        if (scan.kappas[i] >= scan.kappa0_estimate) {
            CHECK(scan.n_fixed_points[i] == 3);
            CHECK_FALSE(scan.anomalies[i]);
        }
}

TEST_CASE("threshold preconditions") {
    auto g = make_grid(kPi, 256);
    CHECK_THROWS_AS(estimate_threshold({50.0}, g), std::invalid_argument);
    CHECK_THROWS_AS(estimate_threshold({8.0, 100.0}, g), std::invalid_argument);
    CHECK_THROWS_AS(estimate_threshold({4.0, 50.0}, g), std::invalid_argument);
}

TEST_CASE("contraction of the iterated map above threshold") {
    const double kap = 100.0;
    auto g = make_grid(kPi, 1024);
    auto rep = find_fixed_points(sweep_fmap(kap, 41, g), g);
    const double abar = rep.fixed_points[0].a;
    double a = 0.0;
    double prev_gap = 1.0;
    for (int it = 0; it < 12; ++it) {
        a = eval_F(solve_ergodic(a, kap, g));
        const double gap = std::abs(a - abar);
        if (it > 0 && prev_gap > 1e-12)
            CHECK(gap <= std::max(rep.contraction_bound, 0.05) * prev_gap + 1e-12);
        prev_gap = gap;
    }
    CHECK(std::abs(a - abar) < 1e-9);
}
