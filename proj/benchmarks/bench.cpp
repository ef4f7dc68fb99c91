#include "divstat/analyze.hpp"
#include "divstat/connect.hpp"

#include <benchmark/benchmark.h>

using namespace divstat;

namespace {

Coord pt(double a, double b) {
    Coord x(2);
    x << a, b;
    return x;
}

void BM_Parse(benchmark::State& state) {
    const std::vector<std::string> coords{"x1", "x2"};
    for (auto _ : state) benchmark::DoNotOptimize(parse("-log(0.5*(x1^2+x2^2+1)) + exp(2/(x1^2+x2^2))", coords));
}
BENCHMARK(BM_Parse);

void BM_Jet(benchmark::State& state) {
    const Manifold m = builtin_manifold("half-plane-exp");
    const bool second = state.range(0) != 0;
    for (auto _ : state) benchmark::DoNotOptimize(m.jet(pt(0.3, 1.2), second));
}
BENCHMARK(BM_Jet)->Arg(0)->Arg(1);

void BM_Riemann(benchmark::State& state) {
    const Manifold m = builtin_manifold("paraboloid");
    const LocalJet j = m.jet(pt(0.4, -0.3), true);
    for (auto _ : state) benchmark::DoNotOptimize(riemann(j, ConnectionKind::Nabla));
}
BENCHMARK(BM_Riemann);

void BM_CurvatureRelations(benchmark::State& state) {
    const Manifold m = builtin_manifold("punctured-plane");
    const LocalJet j = m.jet(pt(0.9, 0.4), true);
    for (auto _ : state) benchmark::DoNotOptimize(curvature_relation_residuals(j));
}
BENCHMARK(BM_CurvatureRelations);

void BM_Geodesic(benchmark::State& state) {
    const Manifold m = builtin_manifold("paraboloid");
    for (auto _ : state)
        benchmark::DoNotOptimize(integrate_geodesic(m, ConnectionKind::Nabla, pt(0.2, 0.1), pt(0.5, 0.7), 1.0));
}
BENCHMARK(BM_Geodesic)->Unit(benchmark::kMicrosecond);

void BM_Shoot(benchmark::State& state) {
    const Manifold m = builtin_manifold("half-plane-exp");
    ShootOpts o;
    o.multistart = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(shoot_connect(m, pt(-1, 0.5), pt(1.5, 2), o));
}
BENCHMARK(BM_Shoot)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_CheckSuite(benchmark::State& state) {
    const Manifold m = builtin_manifold("half-plane-exp");
    for (auto _ : state) benchmark::DoNotOptimize(check_suite(m));
}
BENCHMARK(BM_CheckSuite)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
