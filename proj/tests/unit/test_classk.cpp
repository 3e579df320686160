#include "barrier/classk.hpp"
#include "barrier/errors.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace barrier;

TEST(Kappa, ClosedForms) {
    auto lin = KappaFunction::linear(2.0);
    EXPECT_DOUBLE_EQ(lin(3.0), 6.0);
    EXPECT_DOUBLE_EQ(lin(-3.0), -6.0);
    auto pw = KappaFunction::power(2.0, 0.5);
    EXPECT_DOUBLE_EQ(pw(4.0), 4.0);
    EXPECT_DOUBLE_EQ(pw(-4.0), -4.0);
    auto pl = KappaFunction::piecewise({0, 1, 2}, {0, 1, 3}, 0.5);
    EXPECT_DOUBLE_EQ(pl(0.5), 0.5);
    EXPECT_DOUBLE_EQ(pl(1.5), 2.0);
    EXPECT_DOUBLE_EQ(pl(4.0), 4.0);
    EXPECT_DOUBLE_EQ(pl(-1.5), -2.0);
}

TEST(Kappa, RejectsInvalidParameters) {
    EXPECT_THROW(KappaFunction::linear(0.0), ConfigError);
    EXPECT_THROW(KappaFunction::power(1.0, -1.0), ConfigError);
    EXPECT_THROW(KappaFunction::piecewise({0, 1, 1}, {0, 1, 2}, 1.0), ConfigError);
    EXPECT_THROW(KappaFunction::piecewise({0, 1}, {0, 0}, 1.0), ConfigError);
    EXPECT_THROW(KappaFunction::piecewise({1, 2}, {1, 2}, 1.0), ConfigError);
    EXPECT_THROW(KappaFunction::piecewise({0, 1}, {0, 1}, 0.0), ConfigError);
}

TEST(Kappa, CheckKappaAcceptsFamilies) {
    EXPECT_EQ(check_kappa(KappaFunction::linear(1e-3), 100), "");
    EXPECT_EQ(check_kappa(KappaFunction::power(3.0, 2.5), 10), "");
    EXPECT_EQ(check_kappa(KappaFunction::piecewise({0, 0.5, 4}, {0, 2, 2.5}, 1e-3), 50), "");
}

TEST(Kappa, ScaledStaysInFamily) {
    auto a = KappaFunction::piecewise({0, 1}, {0, 2}, 3.0).scaled(0.5);
    EXPECT_DOUBLE_EQ(a(1.0), 1.0);
    EXPECT_DOUBLE_EQ(a(2.0), 2.5);
}

TEST(Majorant, LinearSamplesGiveEpsLift) {
    std::vector<std::pair<double, double>> s;
    for (int i = 0; i <= 100; ++i) s.emplace_back(0.1 * i, 2.0 * 0.1 * i);
    auto a = fit_majorant(s, {1e-6, 1e-3});
    for (int i = 0; i <= 100; ++i) EXPECT_NEAR(a(0.1 * i), 2.001 * 0.1 * i, 1e-12);
}

TEST(Majorant, NegativeSamplesGiveSlopeEps) {
    std::vector<std::pair<double, double>> s{{0, -1}, {1, -5}, {2, -0.5}};
    auto a = fit_majorant(s, {1e-6, 1e-3});
    EXPECT_NEAR(a(1.0), 1e-3, 1e-15);
    EXPECT_NEAR(a(7.0), 7e-3, 1e-15);
}

TEST(MajorantProperty, InfeasibleIffZeroSampleExceedsTol0) {
    auto g = support::rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::pair<double, double>> s;
        for (int i = 0; i < 20; ++i) s.emplace_back(support::uniform(g, 0.01, 5), support::uniform(g, -3, 3));
        double z = support::uniform(g, -2e-6, 3e-6);
        s.emplace_back(0.0, z);
        bool expect_infeasible = z > 1e-6;
        bool threw = false;
        try {
            fit_majorant(s, {1e-6, 1e-3});
        } catch (const InfeasibleMajorant& e) {
            threw = true;
            EXPECT_EQ(e.r(), 0.0);
            EXPECT_EQ(e.value(), z);
        }
        EXPECT_EQ(threw, expect_infeasible) << "z=" << z;
    }
}

TEST(MajorantProperty, FittedFunctionsAreKappaAndDominate) {
    auto g = support::rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::pair<double, double>> s;
        int n = support::uniform_int(g, 1, 200);
        for (int i = 0; i < n; ++i) {
            double r = support::uniform(g, 0, 10);
            s.emplace_back(r, support::uniform(g, -5, 5) + r * support::uniform(g, 0, 3));
        }
        if (trial % 3 == 0) s.emplace_back(0.0, -0.5);
        auto a = fit_majorant(s, {1e-6, 1e-3});
        EXPECT_EQ(check_kappa(a, 20.0, 1000), "");
        EXPECT_EQ(a(0.0), 0.0);
        for (double r : {0.1, 1.0, 5.0, 15.0}) EXPECT_EQ(a(-r), -a(r));
        for (const auto& [r, v] : s) EXPECT_GE(a(r), v) << "r=" << r;
    }
}

TEST(MajorantProperty, RepeatedAndNearEqualKnots) {
    std::vector<std::pair<double, double>> s;
    for (int i = 0; i < 1000; ++i) s.emplace_back(1.0 + i * 1e-17, 1e6 + i);
    s.emplace_back(1.0, 3e6);
    auto a = fit_majorant(s, {1e-6, 1e-3});
    EXPECT_GE(a(1.0), 3e6);
    EXPECT_EQ(check_kappa(a, 10.0), "");
}

TEST(KappaKappa, ClosedForms) {
    auto p = KappaKappaFunction::product(2.0, 0.1);
    EXPECT_DOUBLE_EQ(p(3.0, 4.0), 2.0 * 3 * 4 + 0.3);
    EXPECT_DOUBLE_EQ(p(-3.0, 4.0), -p(3.0, 4.0));
    EXPECT_DOUBLE_EQ(p(3.0, -1.0), p(3.0, 0.0));
    auto s = KappaKappaFunction::separable(KappaFunction::linear(2.0));
    EXPECT_DOUBLE_EQ(s(1.5, 3.0), 3.0 * 4.0);
}

TEST(KappaKappaProperty, SeparableAtZeroReproducesAlpha) {
    auto g = support::rng(21);
    for (const auto& a : {KappaFunction::linear(0.7), KappaFunction::power(2.0, 1.5),
                          KappaFunction::piecewise({0, 1, 3}, {0, 0.5, 4}, 2.0)}) {
        auto e = cbf_alpha_to_ecbf(a);
        for (int i = 0; i < 200; ++i) {
            double r = support::uniform(g, -10, 10);
            EXPECT_DOUBLE_EQ(e(r, 0.0), a(r));
            EXPECT_GE(std::abs(e(r, support::uniform(g, 0, 5))), std::abs(a(r)));
        }
    }
}

TEST(KappaKappa, FitDominatesAndIsMonotone) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> r{0, 1, 2, 4}, c{0, 1, 3};
    std::vector<std::vector<double>> v{{-1, 0, -2}, {0.5, 2, 7}, {1, 1.5, 9}, {nan, 3, 8}};
    auto a = fit_kk_majorant(r, c, v, {1e-6, 1e-3});
    for (std::size_t i = 0; i < r.size(); ++i)
        for (std::size_t j = 0; j < c.size(); ++j)
            if (!std::isnan(v[i][j])) EXPECT_GE(a(r[i], c[j]), v[i][j]) << i << "," << j;
    for (double s : {0.0, 0.5, 2.0, 10.0}) {
        EXPECT_EQ(a(0.0, s), 0.0);
        double prev = 0.0;
        for (double x = 0.05; x < 8; x += 0.05) {
            EXPECT_GT(a(x, s), prev);
            prev = a(x, s);
        }
    }
    for (double x : {0.5, 1.0, 3.0, 6.0}) {
        double prev = a(x, 0.0);
        for (double s = 0.1; s < 6; s += 0.1) {
            EXPECT_GT(a(x, s), prev);
            prev = a(x, s);
        }
    }
}

TEST(KappaKappa, FitRejectsPositiveZeroRow) {
    std::vector<double> r{0, 1}, c{0, 1};
    std::vector<std::vector<double>> v{{0, 0.5}, {1, 2}};
    EXPECT_THROW(fit_kk_majorant(r, c, v), InfeasibleMajorant);
}

TEST(KappaKappa, ReduceToCbfNeedsCompactSet) {
    Grid grid(Box({-3, -3}, {3, 3}), {61, 61});
    auto disk = support::field("4 - x^2 - y^2");
    auto plane = support::field("x");
    std::vector<double> r{0, 1, 2, 4};
    auto alpha = KappaKappaFunction::product(1.0);
    auto a = ecbf_alpha_to_cbf(alpha, *disk, grid, r);
    EXPECT_EQ(check_kappa(a, 10), "");
    // On the disk |x| <= 2, so alpha(r, |x|) <= 2r + eps r.
    EXPECT_GE(a(1.0), alpha(1.0, 1.7));
    EXPECT_THROW(ecbf_alpha_to_cbf(alpha, *plane, grid, r), NotCompact);
}
