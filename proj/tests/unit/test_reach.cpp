#include "barrier/errors.hpp"
#include "barrier/reach.hpp"
#include "barrier/scenarios.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace barrier;

namespace {

// x' = 1 with h = 1 - x^2. h is concave, so along x0 + t its minimum over
// [0, T] sits at an end: V_T(x0) = min(h(x0), h(x0 + T)).
struct Drift {
    ControlSystem sys{{"x"}, {}, {"1"}};
    ExpressionFeedback k{std::vector<std::string>{}, {"x"}};
    ScalarField h{"1 - x^2", {"x"}};
};

double drift_value(double x0, double T) { return std::min(1 - x0 * x0, 1 - (x0 + T) * (x0 + T)); }

} // namespace

TEST(RunningMin, MatchesClosedForm) {
    Drift d;
    for (double x0 : {-2.0, -1.0, -0.4, 0.0, 0.3, 1.5}) {
        std::vector<double> x{x0};
        auto r = running_min(d.sys, d.k, d.h, x, 1.0, 0.01);
        EXPECT_NEAR(r.value, drift_value(x0, 1.0), 1e-9) << x0;
        EXPECT_FALSE(r.blew_up);
    }
}

TEST(RunningMin, FlagsBlowUp) {
    ControlSystem sys({"x"}, {}, {"x^2"});
    ExpressionFeedback k(std::vector<std::string>{}, {"x"});
    ScalarField h("x", {"x"});
    std::vector<double> x{1.0};
    auto r = running_min(sys, k, h, x, 2.0, 1e-3, 1e3);
    EXPECT_TRUE(r.blew_up);
    EXPECT_DOUBLE_EQ(r.value, 1.0);
}

TEST(ValueField, MatchesClosedFormOnLattice) {
    Drift d;
    Grid g(Box({-2}, {2}), {81});
    auto vf = value_field(d.sys, d.k, d.h, g, {0.5, 1.0}, 0.01);
    ASSERT_EQ(vf.values.size(), 2u);
    for (std::size_t i = 0; i < g.size(); ++i) {
        double x0 = g.point(i)[0];
        EXPECT_NEAR(vf.values[0][i], drift_value(x0, 0.5), 1e-9);
        EXPECT_NEAR(vf.values[1][i], drift_value(x0, 1.0), 1e-9);
    }
}

TEST(ValueFieldProperty, NonincreasingInHorizonAndBelowH) {
    auto s = scenarios::get("disk_integrator");
    const auto& h = s->field("h");
    Grid g(Box({-2.5, -2.5}, {2.5, 2.5}), {41, 41});
    ExpressionFeedback away(std::vector<std::string>{"0.3*x + y", "0.3*y - x"}, s->system->state_vars());
    auto vf = value_field(*s->system, away, h, g, {0.25, 0.5, 1.0, 2.0}, 0.01);
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto x = g.point(i);
        EXPECT_LE(vf.values[0][i], h.value(x));
        for (std::size_t j = 1; j < vf.values.size(); ++j) EXPECT_LE(vf.values[j][i], vf.values[j - 1][i]);
    }
}

// V_T(x) >= 0 exactly when the simulated trajectory from x stays in C up to T.
TEST(ValueFieldProperty, SignMatchesSimulatedSafety) {
    auto s = scenarios::get("disk_integrator");
    const auto& h = s->field("h");
    Grid g(Box({-2.5, -2.5}, {2.5, 2.5}), {21, 21});
    ExpressionFeedback away(std::vector<std::string>{"0.3*x + y", "0.3*y - x"}, s->system->state_vars());
    auto vf = value_field(*s->system, away, h, g, {0.5, 1.0}, 0.01);
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto x = g.point(i);
        auto sim = simulate(*s->system, away, x, 1.0, 0.01);
        auto inv = invariance_check(sim, h, 0.0);
        EXPECT_EQ(vf.final()[i] >= 0, inv.pass) << x[0] << "," << x[1];
    }
}

TEST(Convolve, LinearForFixedMask) {
    auto g = support::rng(31);
    Grid grid(Box({-1, -1}, {1, 1}), {31, 31});
    std::vector<double> a(grid.size()), b(grid.size()), mix(grid.size());
    std::vector<bool> mask(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        a[i] = support::uniform(g, -1, 1);
        b[i] = support::uniform(g, -1, 1);
        mix[i] = 2.5 * a[i] - 0.75 * b[i];
        auto x = grid.point(i);
        mask[i] = x[0] * x[0] + x[1] * x[1] < 0.8;
    }
    auto ca = convolve(grid, a, mask, 0.1), cb = convolve(grid, b, mask, 0.1), cm = convolve(grid, mix, mask, 0.1);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!mask[i]) continue;
        EXPECT_NEAR(cm[i], 2.5 * ca[i] - 0.75 * cb[i], 1e-12);
    }
    std::vector<double> ones(grid.size(), 3.0);
    auto c1 = convolve(grid, ones, mask, 0.1);
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (mask[i]) EXPECT_NEAR(c1[i], 3.0, 1e-12);
}

TEST(Mollify, StaysWithinTheBoundAndCopiesOutside) {
    Grid grid(Box({-2, -2}, {2, 2}), {81, 81});
    std::vector<double> V(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        auto x = grid.point(i);
        V[i] = 1 - x[0] * x[0] - std::abs(x[1]);
    }
    auto psi = mollify(grid, V, 2 * grid.min_spacing());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (V[i] > 0) {
            EXPECT_TRUE(psi.bound_ok[i]);
            EXPECT_LT(std::abs(psi.values[i] - V[i]), std::min(V[i] / 2, 1.0));
            EXPECT_GT(psi.sigma[i], 0.0);
        } else {
            EXPECT_EQ(psi.values[i], V[i]);
            EXPECT_EQ(psi.sigma[i], 0.0);
        }
    }
}

TEST(Mollify, SmoothedDecreaseOnDisk) {
    auto s = scenarios::get("disk_integrator");
    const auto& spec = *s->reach;
    auto k = s->controller(spec.controller);
    auto vf = value_field(*s->system, *k, s->field("h"), spec.grid, spec.horizons, spec.dt);
    auto psi = mollify(vf, spec.sigma_cells * spec.grid.min_spacing());
    auto rep = verify_smoothed_decrease(*s->system, *k, psi, vf.final(), s->alpha);
    EXPECT_GT(rep.checked, 1000u);
    EXPECT_EQ(rep.pass_fraction, 1.0);
}

TEST(Mollify, RejectsBadBandwidth) {
    Grid grid(Box({-1}, {1}), {11});
    std::vector<double> V(grid.size(), 1.0);
    EXPECT_THROW(mollify(grid, V, 0.0), ConfigError);
    EXPECT_THROW(mollify(grid, std::vector<double>(3, 1.0), 0.1), ConfigError);
}
