#include "barrier/errors.hpp"
#include "barrier/expr.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <thread>

using namespace barrier;
using barrier::expr::Expression;

namespace {

const std::vector<std::string> kXYZ{"x", "y", "z"};

double at(const std::string& text, std::vector<double> v) {
    return Expression::parse(text, kXYZ).eval(v);
}

} // namespace

TEST(Expr, ArithmeticAndPrecedence) {
    EXPECT_DOUBLE_EQ(at("1 + 2*3", {0, 0, 0}), 7.0);
    EXPECT_DOUBLE_EQ(at("(1 + 2)*3", {0, 0, 0}), 9.0);
    EXPECT_DOUBLE_EQ(at("2^3^2", {0, 0, 0}), 512.0);
    EXPECT_DOUBLE_EQ(at("-2^2", {0, 0, 0}), -4.0);
    EXPECT_DOUBLE_EQ(at("2^-1", {0, 0, 0}), 0.5);
    EXPECT_DOUBLE_EQ(at("x - y - z", {5, 2, 1}), 2.0);
    EXPECT_DOUBLE_EQ(at("x / y / z", {8, 2, 2}), 2.0);
    EXPECT_DOUBLE_EQ(at("1.5e2 + .5", {0, 0, 0}), 150.5);
}

TEST(Expr, ReservedConstants) {
    EXPECT_DOUBLE_EQ(at("pi", {0, 0, 0}), std::numbers::pi);
    EXPECT_DOUBLE_EQ(at("e", {0, 0, 0}), std::numbers::e);
    EXPECT_DOUBLE_EQ(at("exp(1) - e", {0, 0, 0}), 0.0);
}

TEST(Expr, Functions) {
    EXPECT_DOUBLE_EQ(at("min(x, y, z)", {3, -1, 2}), -1.0);
    EXPECT_DOUBLE_EQ(at("max(x, y, z)", {3, -1, 2}), 3.0);
    EXPECT_DOUBLE_EQ(at("norm(x, y)", {3, 4, 0}), 5.0);
    EXPECT_DOUBLE_EQ(at("abs(x)", {-2, 0, 0}), 2.0);
    EXPECT_NEAR(at("tanh(x)", {0.3, 0, 0}), std::tanh(0.3), 1e-15);
    EXPECT_NEAR(at("log(x)*sqrt(y)", {2, 9, 0}), std::log(2.0) * 3.0, 1e-15);
}

TEST(Expr, SyntaxErrorsCarryOffsets) {
    try {
        Expression::parse("x + * y", kXYZ);
        FAIL();
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.offset(), 4u);
    }
    EXPECT_THROW(Expression::parse("(x + y", kXYZ), SyntaxError);
    EXPECT_THROW(Expression::parse("", kXYZ), SyntaxError);
    EXPECT_THROW(Expression::parse("sin", kXYZ), SyntaxError);
    EXPECT_THROW(Expression::parse("foo(x)", kXYZ), SyntaxError);
    EXPECT_THROW(Expression::parse("x y", kXYZ), SyntaxError);
}

TEST(Expr, UnknownVariable) {
    try {
        Expression::parse("x + w", kXYZ);
        FAIL();
    } catch (const UnknownVariable& e) {
        EXPECT_EQ(e.name(), "w");
    }
}

TEST(Expr, DomainErrorsNameTheSubexpression) {
    EXPECT_THROW(at("sqrt(x)", {-1, 0, 0}), DomainError);
    EXPECT_THROW(at("log(x - 1)", {1, 0, 0}), DomainError);
    EXPECT_THROW(at("1/x", {0, 0, 0}), DomainError);
    EXPECT_THROW(at("x^0.5", {-1, 0, 0}), DomainError);
    try {
        at("y + log(x - 1)", {0, 0, 0});
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_NE(e.subexpression().find("log"), std::string::npos);
    }
}

TEST(Expr, GradientOfKnownFunction) {
    auto e = Expression::parse("x^2*y + sin(z)", kXYZ);
    auto g = expr::gradient(e, {{"x", 1.5}, {"y", -2.0}, {"z", 0.4}}, {"x", "y", "z"});
    ASSERT_EQ(g.size(), 3u);
    EXPECT_DOUBLE_EQ(g[0], 2 * 1.5 * -2.0);
    EXPECT_DOUBLE_EQ(g[1], 1.5 * 1.5);
    EXPECT_DOUBLE_EQ(g[2], std::cos(0.4));
}

TEST(Expr, NonsmoothRightDerivatives) {
    auto e = Expression::parse("abs(x)", kXYZ);
    auto g = expr::gradient(e, {{"x", 0.0}, {"y", 0.0}, {"z", 0.0}}, {"x"});
    EXPECT_DOUBLE_EQ(g[0], 1.0);
    auto m = Expression::parse("max(x, y)", kXYZ);
    auto gm = expr::gradient(m, {{"x", 1.0}, {"y", 1.0}, {"z", 0.0}}, {"x", "y"});
    EXPECT_DOUBLE_EQ(gm[0], 1.0);
    EXPECT_DOUBLE_EQ(gm[1], 1.0);
    EXPECT_THROW(expr::gradient(Expression::parse("sqrt(x)", kXYZ), {{"x", 0.0}, {"y", 0}, {"z", 0}}, {"x"}),
                 DomainError);
}

TEST(Expr, ValueGradientAgreesWithDual) {
    auto e = Expression::parse("exp(x*y)/(2 + cos(z))", kXYZ);
    std::vector<double> x{0.3, -0.7, 1.1};
    std::vector<int> seeds{0, 1, 2};
    std::vector<double> g(3);
    double v = e.value_gradient(x, seeds, g);
    EXPECT_DOUBLE_EQ(v, e.eval(x));
    std::vector<expr::DualValue> dual(3);
    for (int i = 0; i < 3; ++i) {
        dual[static_cast<std::size_t>(i)] = expr::DualValue(x[static_cast<std::size_t>(i)], 3);
        dual[static_cast<std::size_t>(i)].partials[static_cast<std::size_t>(i)] = 1.0;
    }
    auto d = e.eval_dual(dual);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(d.partials[i], g[i]);
}

TEST(Expr, SubstituteAndRebind) {
    auto e = Expression::parse("x*y", {"x", "y"});
    auto t = Expression::parse("t^2", {"t"});
    auto s = e.substitute({"t", "y"}, {{"x", t.rebind({"t", "y"})}});
    EXPECT_DOUBLE_EQ(s.eval(std::vector<double>{3, 2}), 18.0);
    auto r = e.rebind({"y", "x", "w"});
    EXPECT_DOUBLE_EQ(r.eval(std::vector<double>{2, 5, 100}), 10.0);
    EXPECT_THROW(e.rebind({"x"}), UnknownVariable);
}

TEST(Expr, OperatorsBuildTrees) {
    auto x = Expression::variable("x", kXYZ);
    auto y = Expression::variable("y", kXYZ);
    auto e = expr::pow(x, Expression::constant(2, kXYZ)) + x * y - y / Expression::constant(4, kXYZ);
    EXPECT_DOUBLE_EQ(e.eval(std::vector<double>{2, 4, 0}), 4 + 8 - 1);
    auto c = expr::call(expr::Function::Max, {x, y});
    EXPECT_DOUBLE_EQ(c.eval(std::vector<double>{2, 4, 0}), 4.0);
}

TEST(Expr, StructuralEquality) {
    auto a = Expression::parse("x + 2*y", kXYZ);
    auto b = Expression::parse("x+2 * y", kXYZ);
    auto c = Expression::parse("2*y + x", kXYZ);
    EXPECT_TRUE(a.structurally_equal(b));
    EXPECT_FALSE(a.structurally_equal(c));
}

TEST(ExprProperty, PrintParseRoundTrip) {
    auto g = support::rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        std::string text = support::random_expression(g, 4);
        auto e = Expression::parse(text, kXYZ);
        auto back = Expression::parse(expr::print(e), kXYZ);
        EXPECT_TRUE(back.structurally_equal(e)) << text << " -> " << expr::print(e);
        std::vector<double> x{support::uniform(g, -2, 2), support::uniform(g, -2, 2), support::uniform(g, -2, 2)};
        EXPECT_EQ(back.eval(x), e.eval(x)) << text;
    }
}

TEST(ExprProperty, GradientMatchesFiniteDifferences) {
    auto g = support::rng(7);
    for (int trial = 0; trial < 300; ++trial) {
        std::string text = support::random_expression(g, 3);
        auto e = Expression::parse(text, kXYZ);
        std::vector<double> x{support::uniform(g, -1.5, 1.5), support::uniform(g, -1.5, 1.5),
                              support::uniform(g, -1.5, 1.5)};
        std::vector<int> seeds{0, 1, 2};
        std::vector<double> grad(3);
        double v = e.value_gradient(x, seeds, grad);
        auto f = [&](const std::vector<double>& p) { return e.eval(p); };
        for (std::size_t k = 0; k < 3; ++k) {
            double fd = support::richardson_derivative(f, x, k);
            double tol = std::max(1e-6, 1e-5 * std::max(std::abs(v), std::abs(grad[k])));
            EXPECT_NEAR(grad[k], fd, tol) << text << " d/d" << kXYZ[k];
        }
    }
}

TEST(ExprProperty, ConcurrentEvaluationIsPure) {
    auto e = Expression::parse("sin(x)*exp(y) + z^3", kXYZ);
    std::vector<double> x{0.1, 0.2, 0.3};
    double ref = e.eval(x);
    std::vector<double> out(64);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < 4; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < out.size(); i += 4) out[i] = e.eval(x);
        });
    for (auto& th : pool) th.join();
    for (double v : out) EXPECT_EQ(v, ref);
}
