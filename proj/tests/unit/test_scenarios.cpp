#include "barrier/errors.hpp"
#include "barrier/scenarios.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <boost/math/constants/constants.hpp>

#include <cmath>

using namespace barrier;

TEST(Registry, ListsBuiltins) {
    auto names = scenarios::list();
    std::vector<std::string> expect{"annulus_obstruction", "disk_integrator", "ex_exp_sin", "ex_no_safe_stab",
                                    "ex_nonaffine_disconnected", "ex_scalar_xu", "ex_wrong_candidate"};
    EXPECT_EQ(names, expect);
    for (const auto& n : names) {
        auto s = scenarios::get(n);
        EXPECT_EQ(s->name, n);
        EXPECT_FALSE(s->expected.empty()) << n;
        EXPECT_TRUE(s->has_field("h")) << n;
        auto again = scenarios::parse(scenarios::source(n));
        EXPECT_EQ(again->name, n);
        EXPECT_EQ(again->expected, s->expected);
    }
    EXPECT_THROW(scenarios::get("no_such_scenario"), UnknownScenario);
}

TEST(Registry, FlattenedExpectations) {
    auto s = scenarios::get("ex_wrong_candidate");
    EXPECT_EQ(s->expected.at("certify_cbf.h"), "Refuted");
    EXPECT_EQ(s->expected.at("certify_cbf.h_alt"), "Certified");
    EXPECT_EQ(s->expected.at("obstruction"), "unbounded_safe_set");
    EXPECT_EQ(s->policy_for("h").kind, InputPolicy::Kind::UnboundedAffine);
    EXPECT_EQ(s->policy_for("h_alt").kind, InputPolicy::Kind::Feedback);
    EXPECT_THROW(s->field("nope"), ConfigError);
    EXPECT_THROW(s->controller("nope"), ConfigError);
}

TEST(Parse, RejectsMalformedConfigs) {
    EXPECT_THROW(scenarios::parse("not json"), ConfigError);
    EXPECT_THROW(scenarios::parse("{}"), ConfigError);
    EXPECT_THROW(scenarios::parse("[1, 2]"), ConfigError);
    const std::string base = R"({"name": "t", "system": {"state_vars": ["x"], "input_vars": [], "dynamics": ["-x"]},
                                 "fields": {"h": "1 - x^2"}})";
    EXPECT_EQ(scenarios::parse(base)->name, "t");
    std::string unknown_key = base;
    unknown_key.insert(unknown_key.size() - 1, R"(, "bogus": 1)");
    EXPECT_THROW(scenarios::parse(unknown_key), ConfigError);
    std::string bad_alpha = base;
    bad_alpha.insert(bad_alpha.size() - 1, R"(, "alpha": {"kind": "cubic", "params": {}})");
    EXPECT_THROW(scenarios::parse(bad_alpha), ConfigError);
    std::string bad_expr = base;
    bad_expr.replace(bad_expr.find("1 - x^2"), 7, "1 - w^2");
    EXPECT_THROW(scenarios::parse(bad_expr), UnknownVariable);
    EXPECT_THROW(scenarios::load("/nonexistent/config.json"), ConfigError);
}

// Oracle: sign of the product on a fine u lattice.
TEST(FeasibleInputs, MatchBruteForce) {
    for (double x = -1.0; x <= 4.0; x += 0.125) {
        auto iv = scenarios::feasible_input_intervals(x);
        for (double u = -5; u <= 5; u += 1.0 / 64) {
            double v = ((u - 1) * (u - 1) - (x - 1)) * ((u + 1) * (u + 1) + (x - 2));
            bool inside = false;
            for (auto [lo, hi] : iv) inside = inside || (u >= lo - 1e-12 && u <= hi + 1e-12);
            if (std::abs(v) > 1e-9) EXPECT_EQ(inside, v <= 0) << "x=" << x << " u=" << u;
        }
        if (x > 1 && x < 2) EXPECT_EQ(iv.size(), 2u) << x;
    }
    auto iv = scenarios::feasible_input_intervals(1.5);
    EXPECT_NEAR(iv[0].first, -1 - std::sqrt(0.5), 1e-15);
    EXPECT_NEAR(iv[1].second, 1 + std::sqrt(0.5), 1e-15);
}

TEST(ExpSinSequence, RootsLieInTheirWindows) {
    const Extended pi = boost::math::constants::pi<Extended>();
    auto pts = scenarios::exp_sin_sequence(1, 8, 0.25);
    ASSERT_EQ(pts.size(), 8u);
    for (int k = 1; k <= 8; ++k) {
        const Extended& a = pts[static_cast<std::size_t>(k - 1)];
        EXPECT_GT(a, (2 * k + 1) * pi - pi / 4);
        EXPECT_LT(a, (2 * k + 1) * pi);
        // The root is bracketed to a relative width of 1e-28.
        Extended d = a * Extended(1e-28);
        Extended lo = exp(a - d) * sin(a - d) - Extended(0.25), hi = exp(a + d) * sin(a + d) - Extended(0.25);
        EXPECT_TRUE((lo > 0) != (hi > 0)) << k;
    }
    EXPECT_THROW(scenarios::exp_sin_sequence(3, 2, 0.25), ConfigError);
    EXPECT_THROW(scenarios::exp_sin_sequence(1, 2, 0.0), ConfigError);
}

// The completion of the two-disk union matches the first disk's function on
// the safe part of a ball around (0, 5).
TEST(NoSafeStabilizer, SmoothMaxIsLocal) {
    auto s = scenarios::get("ex_no_safe_stab");
    const auto& h = s->field("h");
    const auto& h1 = s->field("h1");
    std::size_t checked = 0;
    for (int i = -30; i <= 30; ++i)
        for (int j = -30; j <= 30; ++j) {
            std::vector<double> x{i * 0.01, 5 + j * 0.01};
            if (std::hypot(x[0], x[1] - 5) > 0.3 || h.value(x) < 0) continue;
            ++checked;
            EXPECT_EQ(h.value(x), h1.value(x)) << x[0] << "," << x[1];
        }
    EXPECT_GT(checked, 100u);
    std::vector<double> p{0, 5};
    EXPECT_NEAR(h.value(p), 0.0, 1e-12);
}

TEST(NoSafeStabilizer, LeavesUnderTheConstantInput) {
    auto s = scenarios::get("ex_no_safe_stab");
    const auto& sp = *s->simulate;
    SimulateOptions opt;
    opt.h = s->field_ptr("h");
    auto r = simulate(*s->system, *s->controller(sp.controller), sp.x0, sp.T, sp.dt, opt);
    auto inv = invariance_check(r, 1e-6);
    EXPECT_FALSE(inv.pass);
    EXPECT_NEAR(r.h.back(), -2.5e-3, 0.2 * 2.5e-3);
}
