#include <benchmark/benchmark.h>

#include "mixlab/dynamics.hpp"
#include "mixlab/markov_noise.hpp"
#include "mixlab/measures.hpp"
#include "mixlab/pushforward.hpp"

using namespace mixlab;

namespace {

GridDensity random_density(const Box& box, int cells, std::uint64_t seed) {
    GridDensity g(box, {cells});
    RngStream rng(seed);
    for (std::size_t i = 0; i < g.cell_count(); ++i) g.value(i) = rng.uniform01();
    g.normalize();
    return g;
}

void bm_tv_distance(benchmark::State& state) {
    Box box(vec1(0.0), vec1(1.0));
    int cells = static_cast<int>(state.range(0));
    GridDensity a = random_density(box, cells, 1);
    GridDensity b = random_density(box, cells, 2);
    for (auto _ : state) benchmark::DoNotOptimize(tv_distance(a, b));
}
BENCHMARK(bm_tv_distance)->Arg(256)->Arg(4096);

void bm_flow_map(benchmark::State& state) {
    KickedOde ode = make_cubic_ode(6.0, static_cast<int>(state.range(0)));
    Vec x = vec1(1.3);
    for (auto _ : state) benchmark::DoNotOptimize(flow_map(ode, x));
}
BENCHMARK(bm_flow_map)->Arg(8)->Arg(100);

void bm_kernel_sample(benchmark::State& state) {
    MarkovKernel k = kernel_catalog("ar1_truncgauss", {{"a", 0.3}, {"s", 0.6}});
    RngStream rng(7);
    Vec y = vec1(0.2);
    for (auto _ : state) y = sample(k, y, rng);
}
BENCHMARK(bm_kernel_sample);

void bm_kernel_sample_cached(benchmark::State& state) {
    MarkovKernel k = kernel_catalog("ar1_truncgauss", {{"a", 0.3}, {"s", 0.6}});
    CdfCache cache(k, 512);
    RngStream rng(7);
    Vec y = vec1(0.2);
    for (auto _ : state) y = cache.sample_quantized(y, rng);
}
BENCHMARK(bm_kernel_sample_cached);

void bm_k_step_kernel(benchmark::State& state) {
    MarkovKernel k = kernel_catalog("ar1_truncgauss", {{"a", 0.3}, {"s", 0.6}});
    int steps = static_cast<int>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(k_step_kernel(k, vec1(0.4), steps, 256));
}
BENCHMARK(bm_k_step_kernel)->Arg(1)->Arg(4);

void bm_pushforward(benchmark::State& state) {
    RegularMap F{2, 1, [](const Vec&, const Vec& y) { return vec1(y[0] + y[1]); },
                 [](const Vec&, const Vec&) {
                     Mat J(1, 2);
                     J << 1.0, 1.0;
                     return J;
                 },
                 0.0};
    ParamDensityKernel lam{[](const Vec&, const Vec& y) {
                               return (y[0] >= 0.0 && y[0] <= 1.0 && y[1] >= 0.0 &&
                                       y[1] <= 1.0)
                                          ? 1.0
                                          : 0.0;
                           },
                           Box(vec2(0.0, 0.0), vec2(1.0, 1.0)), 0.0};
    int cells = static_cast<int>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(pushforward_density(F, lam, Vec::Zero(0),
                                                     Box(vec1(0.0), vec1(2.0)), {cells}));
}
BENCHMARK(bm_pushforward)->Arg(64)->Arg(256);

} // namespace

BENCHMARK_MAIN();
