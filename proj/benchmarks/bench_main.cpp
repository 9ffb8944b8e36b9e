#include <benchmark/benchmark.h>

#include <roughbsde/bsde_mc.hpp>
#include <roughbsde/flow.hpp>
#include <roughbsde/presets.hpp>
#include <roughbsde/rough_path.hpp>
#include <roughbsde/rpde.hpp>

using namespace rbsde;

namespace {

PiecewiseLinearPath unit_slope() { return PiecewiseLinearPath({0.0, 1.0}, {{0.0}, {1.0}}); }

void BM_Signature(benchmark::State& state) {
    const auto rp = brownian_lift_sample(1, uniform_grid(1.0, static_cast<std::size_t>(state.range(0))), 2);
    for (auto _ : state) benchmark::DoNotOptimize(rp.signature(0, rp.intervals()));
}
BENCHMARK(BM_Signature)->Arg(256)->Arg(4096);

void BM_PVariation(benchmark::State& state) {
    const auto rp = brownian_lift_sample(1, uniform_grid(1.0, static_cast<std::size_t>(state.range(0))), 2);
    for (auto _ : state) benchmark::DoNotOptimize(p_variation_norm(rp));
}
BENCHMARK(BM_PVariation)->Arg(64)->Arg(256);

void BM_FlowTable(benchmark::State& state) {
    const auto field = make_preset("sinH").spec.field;
    const auto rp = brownian_lift_sample(3, uniform_grid(1.0, 64), 1);
    FlowGridSpec g;
    g.times = uniform_grid(1.0, 64);
    g.nx = static_cast<std::size_t>(state.range(0));
    g.ny = 21;
    for (auto _ : state) benchmark::DoNotOptimize(solve_flow_rough(field, rp, g));
}
BENCHMARK(BM_FlowTable)->Arg(21)->Arg(81)->Unit(benchmark::kMillisecond);

void BM_SmoothPde(benchmark::State& state) {
    const auto spec = make_preset("sinH").spec;
    PdeGrids g;
    g.nx = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(solve_pde_smooth(spec, unit_slope(), g));
}
BENCHMARK(BM_SmoothPde)->Arg(81)->Arg(161)->Unit(benchmark::kMillisecond);

void BM_RoughPde(benchmark::State& state) {
    const auto spec = make_preset("xyH").spec;
    const auto rp = brownian_lift_sample(42, uniform_grid(1.0, 64), 1);
    PdeGrids g;
    for (auto _ : state) benchmark::DoNotOptimize(solve_rpde(spec, rp, g));
}
BENCHMARK(BM_RoughPde)->Unit(benchmark::kMillisecond);

void BM_Regression(benchmark::State& state) {
    const auto spec = make_preset("discount").spec;
    McConfig mc;
    mc.n_paths = static_cast<std::size_t>(state.range(0));
    mc.nt = 50;
    const auto zeta = lift_smooth(unit_slope(), 2.5);
    for (auto _ : state) benchmark::DoNotOptimize(solve_bsde(spec, zeta, mc));
}
BENCHMARK(BM_Regression)->Arg(2000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
