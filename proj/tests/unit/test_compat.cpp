#include "barrier/compat.hpp"
#include "barrier/errors.hpp"
#include "barrier/scenarios.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace barrier;

namespace {

struct LatticeAnswer {
    bool feasible = false;
    bool strict = false;
};

// Exhaustive search over an input lattice of spacing 1/16. With integer data
// every boundary value the analytic test compares against is a lattice value.
LatticeAnswer lattice_oracle(const HalfSpaces& hs, double bound, double strict_tol) {
    LatticeAnswer ans;
    const int n = static_cast<int>(bound * 16);
    auto test = [&](double pu, double qu) {
        if (pu <= hs.A + 1e-12 && qu >= hs.B - 1e-12) ans.feasible = true;
        if (pu <= hs.A - strict_tol && qu >= hs.B + strict_tol) ans.strict = true;
    };
    if (hs.p.size() == 1) {
        for (int i = -n; i <= n && !ans.strict; ++i) {
            double u = i / 16.0;
            test(hs.p[0] * u, hs.q[0] * u);
        }
    } else {
        for (int i = -n; i <= n && !ans.strict; ++i)
            for (int j = -n; j <= n && !ans.strict; ++j) {
                double u0 = i / 16.0, u1 = j / 16.0;
                test(hs.p[0] * u0 + hs.p[1] * u1, hs.q[0] * u0 + hs.q[1] * u1);
            }
    }
    return ans;
}

HalfSpaces random_half_spaces(std::mt19937_64& g, std::size_t m) {
    HalfSpaces hs;
    for (std::size_t i = 0; i < m; ++i) {
        hs.p.push_back(support::uniform_int(g, -2, 2));
        hs.q.push_back(support::uniform_int(g, -2, 2));
    }
    hs.A = support::uniform_int(g, -2, 2);
    hs.B = support::uniform_int(g, -2, 2);
    return hs;
}

ClfSpec radial_clf(double a, double c) {
    char v[64], w[64];
    std::snprintf(v, sizeof v, "%.6f*(x^2 + y^2)", a);
    std::snprintf(w, sizeof w, "%.6f*(x^2 + y^2)", c);
    return {support::field(v), support::field(w)};
}

} // namespace

TEST(Compat, StatusNames) {
    EXPECT_EQ(pair_status_name(PairStatus::StrictlyCompatible), "StrictlyCompatible");
    EXPECT_EQ(pair_status_name(PairStatus::Compatible), "Compatible");
    EXPECT_EQ(pair_status_name(PairStatus::Incompatible), "Incompatible");
}

TEST(Compat, ClassifiesEachCase) {
    // Both rows free of u.
    EXPECT_EQ(classify_half_spaces({{0}, {0}, 1, -1}).status, PairStatus::StrictlyCompatible);
    EXPECT_EQ(classify_half_spaces({{0}, {0}, 0, -1}).status, PairStatus::Compatible);
    EXPECT_EQ(classify_half_spaces({{0}, {0}, -1, -1}).status, PairStatus::Incompatible);
    // Only the barrier row sees u.
    EXPECT_EQ(classify_half_spaces({{0}, {1}, 1, 5}).status, PairStatus::StrictlyCompatible);
    EXPECT_EQ(classify_half_spaces({{0}, {1}, -1, 5}).status, PairStatus::Incompatible);
    // Opposed normals: u can satisfy both.
    EXPECT_EQ(classify_half_spaces({{1}, {-1}, -3, 2}).status, PairStatus::StrictlyCompatible);
    // Aligned normals with a gap, touching, and overlapping.
    EXPECT_EQ(classify_half_spaces({{1}, {1}, -1, 0}).status, PairStatus::Incompatible);
    EXPECT_EQ(classify_half_spaces({{1}, {1}, 0, 0}).status, PairStatus::Compatible);
    EXPECT_EQ(classify_half_spaces({{1}, {1}, 1, 0}).status, PairStatus::StrictlyCompatible);
    // Independent normals in two inputs.
    auto pc = classify_half_spaces({{1, 0}, {0, 1}, -7, 9});
    EXPECT_EQ(pc.status, PairStatus::StrictlyCompatible);
    EXPECT_NEAR(pc.clf_slack, 1.0, 1e-12);
    EXPECT_NEAR(pc.cbf_slack, 1.0, 1e-12);
}

TEST(CompatProperty, AgreesWithLatticeSearch) {
    auto g = support::rng(41);
    for (std::size_t m : {1u, 2u}) {
        const double bound = m == 1 ? 64 : 24;
        for (int trial = 0; trial < (m == 1 ? 400 : 150); ++trial) {
            HalfSpaces hs = random_half_spaces(g, m);
            auto pc = classify_half_spaces(hs);
            auto oracle = lattice_oracle(hs, bound, 1e-6);
            std::string tag = "p=" + std::to_string(hs.p[0]) + " q=" + std::to_string(hs.q[0]) +
                              " A=" + std::to_string(hs.A) + " B=" + std::to_string(hs.B) + " m=" + std::to_string(m);
            EXPECT_EQ(pc.status != PairStatus::Incompatible, oracle.feasible) << tag;
            EXPECT_EQ(pc.status == PairStatus::StrictlyCompatible, oracle.strict) << tag;
            if (pc.status == PairStatus::Incompatible) continue;
            ASSERT_EQ(pc.u.size(), m);
            double pu = 0, qu = 0;
            for (std::size_t i = 0; i < m; ++i) {
                pu += hs.p[i] * pc.u[i];
                qu += hs.q[i] * pc.u[i];
            }
            EXPECT_NEAR(pc.clf_slack, hs.A - pu, 1e-12) << tag;
            EXPECT_NEAR(pc.cbf_slack, qu - hs.B, 1e-12) << tag;
            EXPECT_GE(pc.clf_slack, -1e-12) << tag;
            EXPECT_GE(pc.cbf_slack, -1e-12) << tag;
        }
    }
}

TEST(Compat, HalfSpacesFromSystem) {
    auto sys = support::single_integrator();
    ClfSpec clf = radial_clf(0.5, 0.1);
    auto h = support::field("4 - x^2 - y^2");
    std::vector<double> x{1, 2};
    auto hs = pair_half_spaces(*sys, clf, *h, BarrierAlpha(KappaFunction::linear(2.0)), x);
    EXPECT_EQ(hs.p, (std::vector<double>{1, 2}));
    EXPECT_DOUBLE_EQ(hs.A, -0.5);
    EXPECT_EQ(hs.q, (std::vector<double>{-2, -4}));
    EXPECT_DOUBLE_EQ(hs.B, -2.0 * (4 - 5));
    EXPECT_THROW(pair_half_spaces(*sys, {clf.V, nullptr}, *h, {}, x), ConfigError);
}

TEST(Compat, DiskPairIsStrict) {
    auto s = scenarios::get("disk_integrator");
    Grid g = s->compat->grid;
    CompatOptions opt;
    opt.origin_radius = 2 * g.min_spacing() * (1 + 1e-9);
    auto rep = compat_scan(*s->system, s->clf(), s->field("h"), s->alpha, g, opt);
    EXPECT_EQ(rep.region, PairStatus::StrictlyCompatible);
    EXPECT_EQ(rep.incompatible, 0u);
    EXPECT_GT(rep.origin, 0u);
    EXPECT_EQ(rep.strict + rep.origin, rep.points.size());
    EXPECT_THROW(compat_scan(*s->system, s->clf(), *support::field("-1 - x^2"), s->alpha, g, opt), EmptyRegion);
}

// A bounded unsafe component rules out strict compatibility for any pair.
TEST(CompatProperty, AnnulusIsNeverStrict) {
    auto s = scenarios::get("annulus_obstruction");
    auto g = support::rng(43);
    for (int trial = 0; trial < 5; ++trial) {
        ClfSpec clf = radial_clf(support::uniform(g, 0.2, 3), support::uniform(g, 0.01, 1));
        BarrierAlpha alpha(KappaFunction::linear(support::uniform(g, 0.1, 10)));
        auto rep = compat_scan(*s->system, clf, s->field("h"), alpha, s->compat->grid);
        EXPECT_NE(rep.region, PairStatus::StrictlyCompatible) << trial;
        EXPECT_FALSE(rep.non_strict_points.empty());
    }
}

TEST(Compat, PointCompatNeedsSplit) {
    auto s = scenarios::get("ex_nonaffine_disconnected");
    std::vector<double> x{1, 1};
    ClfSpec clf = radial_clf(0.5, 0.1);
    EXPECT_THROW(point_compat(*s->system, clf, s->field("h"), {}, x), NotAffine);
}

TEST(Obstruction, DiagnosesTopology) {
    Grid g(Box({-4, -4}, {4, 4}), {81, 81});
    EXPECT_TRUE(obstruction_diagnose(*support::field("4 - x^2 - y^2"), g).empty());
    auto annulus = obstruction_diagnose(*support::field("(x^2 + y^2 - 1)*(9 - x^2 - y^2)"), g);
    ASSERT_FALSE(annulus.empty());
    EXPECT_EQ(annulus[0].kind, "bounded_unsafe_component");
    auto half = obstruction_diagnose(*support::field("x"), g);
    ASSERT_EQ(half.size(), 1u);
    EXPECT_EQ(half[0].kind, "unbounded_safe_set");
}

TEST(Obstruction, BoundaryPoints) {
    Grid g(Box({-1}, {1}), {5});
    std::vector<double> h{-1, 0.5, 1, 0.5, 0.01};
    EXPECT_EQ(boundary_points(h, g, 0.0), (std::vector<std::size_t>{1}));
    EXPECT_EQ(boundary_points(h, g, 0.05), (std::vector<std::size_t>{1, 4}));
}

TEST(Clbf, ConstructionChainOnDisk) {
    auto s = scenarios::get("disk_integrator");
    Grid g = s->compat->grid;
    auto u_str = s->controller("u_str"), u_st = s->controller("u_st");
    auto c = clbf_construct(*s->system, s->field_ptr("h"), *u_str, *u_st, s->clf(), g);
    EXPECT_TRUE(c.check.pass()) << (c.check.violations.empty() ? "" : c.check.violations[0]);
    EXPECT_GT(c.eps, 0.0);
    EXPECT_GT(c.lambda, 0.0);
    // Vbar is positive outside C.
    for (std::vector<double> x : {std::vector<double>{2.5, 0}, {0, -2.2}, {-1.6, 1.6}}) EXPECT_GT(c.Vbar->value(x), 0);
    auto pair = clbf_to_pair(*s->system, c, s->field("h"), {u_str.get(), u_st.get()}, g);
    EXPECT_EQ(pair.report.region, PairStatus::StrictlyCompatible);
    ASSERT_EQ(pair.argmin.size(), 2u);
    EXPECT_LE(std::hypot(pair.argmin[0], pair.argmin[1]), 2 * g.min_spacing() + 1e-12);
}

TEST(Clbf, VerifyRejectsAnInvertedFunction) {
    auto s = scenarios::get("disk_integrator");
    Grid g(Box({-3, -3}, {3, 3}), {61, 61});
    auto check = clbf_verify(*s->system, *support::field("4 - x^2 - y^2"), s->field("h"), g);
    EXPECT_FALSE(check.pass());
    EXPECT_FALSE(check.positive_outside);
}

TEST(Clbf, SafeStabilizerGivesPair) {
    auto s = scenarios::get("disk_integrator");
    auto k = s->controller("u_st");
    auto c = s->certify;
    CompatOptions opt;
    opt.origin_radius = 2 * c.grid.min_spacing() * (1 + 1e-9);
    auto p = pair_from_safe_stabilizer(*s->system, k, s->field("h"), {s->field_ptr("V"), nullptr}, c, opt);
    EXPECT_GT(p.w_coefficient, 0.0);
    EXPECT_TRUE(p.clf_failures.empty());
    EXPECT_TRUE(p.cbf_failures.empty());
    EXPECT_NE(p.report.region, PairStatus::Incompatible);
}
