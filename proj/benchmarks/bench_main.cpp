#include "barrier/certify.hpp"
#include "barrier/compat.hpp"
#include "barrier/reach.hpp"
#include "barrier/scenarios.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

using namespace barrier;

static void BM_ExpressionEval(benchmark::State& state) {
    auto e = expr::Expression::parse("exp(y)*x*sin(x + y)^2 - 0.5*sqrt(1 + x^2)", {"x", "y"});
    std::vector<double> x{0.3, -1.2};
    for (auto _ : state) {
        x[0] += 1e-9;
        benchmark::DoNotOptimize(e.eval(x));
    }
}
BENCHMARK(BM_ExpressionEval);

static void BM_ExpressionGradient(benchmark::State& state) {
    auto e = expr::Expression::parse("exp(y)*x*sin(x + y)^2 - 0.5*sqrt(1 + x^2)", {"x", "y"});
    std::vector<double> x{0.3, -1.2}, grad(2);
    std::vector<int> seeds{0, 1};
    for (auto _ : state) benchmark::DoNotOptimize(e.value_gradient(x, seeds, grad));
}
BENCHMARK(BM_ExpressionGradient);

static void BM_CertifyCbf(benchmark::State& state) {
    auto s = scenarios::get("disk_integrator");
    CertificationConfig c = s->certify;
    c.policy = s->policy_for("h");
    int n = static_cast<int>(state.range(0));
    c.grid = Grid(c.grid.box(), {n, n});
    for (auto _ : state) benchmark::DoNotOptimize(certify_cbf(*s->system, s->field("h"), c).verdict);
    state.SetComplexityN(n * n);
}
BENCHMARK(BM_CertifyCbf)->Arg(61)->Arg(121)->Arg(241)->Unit(benchmark::kMillisecond)->Complexity();

static void BM_CompatScan(benchmark::State& state) {
    auto s = scenarios::get("disk_integrator");
    int n = static_cast<int>(state.range(0));
    Grid g(s->compat->grid.box(), {n, n});
    for (auto _ : state) benchmark::DoNotOptimize(compat_scan(*s->system, s->clf(), s->field("h"), s->alpha, g).region);
    state.SetComplexityN(n * n);
}
BENCHMARK(BM_CompatScan)->Arg(101)->Arg(201)->Unit(benchmark::kMillisecond)->Complexity();

static void BM_Mollify(benchmark::State& state) {
    int n = static_cast<int>(state.range(0));
    Grid g(Box({-2, -2}, {2, 2}), {n, n});
    std::vector<double> V(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto x = g.point(i);
        V[i] = 1 - x[0] * x[0] - std::abs(x[1]);
    }
    for (auto _ : state) benchmark::DoNotOptimize(mollify(g, V, 2 * g.min_spacing()).values.data());
}
BENCHMARK(BM_Mollify)->Arg(101)->Arg(201)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
