#include "barrier/domain.hpp"
#include "barrier/errors.hpp"
#include "barrier/parallel.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace barrier;

TEST(Grid, LatticeGeometry) {
    Grid g(Box({-1, 0}, {1, 4}), {5, 3});
    EXPECT_EQ(g.size(), 15u);
    EXPECT_DOUBLE_EQ(g.spacing(0), 0.5);
    EXPECT_DOUBLE_EQ(g.spacing(1), 2.0);
    EXPECT_DOUBLE_EQ(g.min_spacing(), 0.5);
    // Dimension 0 varies slowest.
    EXPECT_EQ(g.point(1), (std::vector<double>{-1, 2}));
    EXPECT_EQ(g.point(3), (std::vector<double>{-0.5, 0}));
    std::vector<int> idx(2);
    g.unravel(7, idx);
    EXPECT_EQ(idx, (std::vector<int>{2, 1}));
    EXPECT_EQ(g.ravel(idx), 7u);
    EXPECT_TRUE(g.on_face(0));
    EXPECT_FALSE(g.on_face(7));
    std::vector<double> x{0.1, 3.2};
    EXPECT_EQ(g.nearest(x), g.ravel(std::vector<int>{2, 2}));
}

TEST(Grid, ExpansionKeepsSpacingAndSubLattice) {
    Grid g(Box({-1, -1}, {1, 1}), {21, 21});
    Grid e = g.expanded(2.0);
    EXPECT_EQ(e.counts(), (std::vector<int>{41, 41}));
    EXPECT_DOUBLE_EQ(e.spacing(0), g.spacing(0));
    EXPECT_EQ(e.box().lo, (std::vector<double>{-2, -2}));
    for (std::size_t i = 0; i < g.size(); i += 37) {
        auto p = g.point(i);
        auto q = e.point(e.nearest(p));
        EXPECT_NEAR(p[0], q[0], 1e-12);
        EXPECT_NEAR(p[1], q[1], 1e-12);
    }
    auto sched = grid_schedule(g, 2.0, 3);
    ASSERT_EQ(sched.size(), 3u);
    EXPECT_EQ(sched[2].counts(), (std::vector<int>{81, 81}));
    auto boxes = expansion_schedule(Box({0, 0}, {2, 2}), 3.0, 2);
    ASSERT_EQ(boxes.size(), 2u);
    EXPECT_EQ(boxes[1].lo, (std::vector<double>{-2, -2}));
    EXPECT_EQ(boxes[1].hi, (std::vector<double>{4, 4}));
}

TEST(Grid, RejectsDegenerateInput) {
    EXPECT_THROW(Grid(Box({0}, {1}), {1}), ConfigError);
    EXPECT_THROW(Grid(Box({1}, {0}), {3}), ConfigError);
    EXPECT_THROW(Grid(Box({0, 0}, {1, 1}), {3}), ConfigError);
    EXPECT_THROW(expansion_schedule(Box({0}, {1}), 1.0, 2), ConfigError);
}

TEST(FloodFill, DiskHasOneBoundedComponent) {
    Grid g(Box({-3, -3}, {3, 3}), {121, 121});
    auto h = support::field("4 - x^2 - y^2");
    auto safe = flood_fill(*h, g, Sign::Nonnegative);
    ASSERT_EQ(safe.components.size(), 1u);
    EXPECT_TRUE(safe.components[0].bounded());
    EXPECT_EQ(safe.bounded_count(), 1u);
    auto unsafe = flood_fill(*h, g, Sign::Negative);
    ASSERT_EQ(unsafe.components.size(), 1u);
    EXPECT_FALSE(unsafe.components[0].bounded());
}

TEST(FloodFill, AnnulusComplementHasTwoComponents) {
    Grid g(Box({-4, -4}, {4, 4}), {161, 161});
    auto h = support::field("(x^2 + y^2 - 1)*(9 - x^2 - y^2)");
    auto unsafe = flood_fill(*h, g, Sign::Negative);
    ASSERT_EQ(unsafe.components.size(), 2u);
    EXPECT_EQ(unsafe.bounded_count(), 1u);
    auto safe = flood_fill(*h, g, Sign::Nonnegative);
    ASSERT_EQ(safe.components.size(), 1u);
    EXPECT_TRUE(safe.components[0].bounded());
}

TEST(FloodFill, HalfPlaneIsUnbounded) {
    Grid g(Box({-2, -2}, {2, 2}), {101, 101});
    auto h = support::field("x + 0.3");
    for (Sign s : {Sign::Nonnegative, Sign::Negative}) {
        auto rep = flood_fill(*h, g, s);
        ASSERT_EQ(rep.components.size(), 1u);
        EXPECT_TRUE(rep.components[0].touches_boundary);
        EXPECT_EQ(rep.bounded_count(), 0u);
    }
}

TEST(FloodFill, LabelCellsFaceAdjacency) {
    // Diagonal neighbours are separate components.
    std::vector<bool> mask{true, false, false, true};
    auto labels = label_cells(mask, {2, 2});
    EXPECT_EQ(labels.sizes.size(), 2u);
    EXPECT_EQ(labels.label[1], -1);
    std::vector<bool> ring(25, false);
    for (int i = 1; i <= 3; ++i) ring[static_cast<std::size_t>(5 + i)] = ring[static_cast<std::size_t>(15 + i)] = true;
    ring[11] = ring[13] = true;
    auto r = label_cells(ring, {5, 5});
    ASSERT_EQ(r.sizes.size(), 1u);
    EXPECT_EQ(r.sizes[0], 8u);
    EXPECT_FALSE(r.touches[0]);
}

TEST(SampleBand, ExactLatticeFilterInOrder) {
    Grid g(Box({-2, -2}, {2, 2}), {41, 41});
    auto h = support::field("1 - x^2 - y^2");
    auto pts = sample_band(*h, g, 0.5);
    std::vector<std::vector<double>> expect;
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto x = g.point(i);
        double v = 1 - x[0] * x[0] - x[1] * x[1];
        if (v >= 0 && v <= 0.5) expect.push_back(x);
    }
    EXPECT_EQ(pts, expect);
    set_thread_count(4);
    EXPECT_EQ(sample_band(*h, g, 0.5), expect);
    set_thread_count(0);
    EXPECT_THROW(sample_band(*h, g, -1.0), ConfigError);
    EXPECT_THROW(sample_band(*support::field("-1 - x^2"), g, 0.5), EmptyBand);
}
