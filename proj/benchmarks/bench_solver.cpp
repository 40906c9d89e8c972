#include "sfbm/limit.hpp"
#include "sfbm/picard.hpp"
#include "sfbm/sde.hpp"

#include <benchmark/benchmark.h>

namespace {

const sfbm::SdeSpec kSpec(1.0, 1.0, 0.5, 1.0, sfbm::HurstParam(0.25));

sfbm::FbmPath noise(std::size_t steps) {
    return sfbm::generate_fbm(sfbm::TimeGrid(1.0, steps), kSpec.hurst, {42, 0});
}

void BM_Solve(benchmark::State& state, sfbm::StepRule rule) {
    const auto path = noise(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(sfbm::solve_regularized(kSpec, 1e-3, path, rule).values.data());
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SolveImplicit(benchmark::State& state) { BM_Solve(state, sfbm::StepRule::drift_implicit); }
void BM_SolveExplicit(benchmark::State& state) { BM_Solve(state, sfbm::StepRule::frozen_explicit); }

void BM_Family(benchmark::State& state) {
    const auto path = noise(4096);
    sfbm::FamilyOptions options;
    options.parallel_levels = state.range(0) != 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sfbm::build_family(kSpec, path, sfbm::EpsilonLadder(0.1, 0.5, 10), options).cauchy_gap);
    }
}

void BM_Picard(benchmark::State& state) {
    const sfbm::TimeGrid grid(1.0, 4096);
    auto driver = noise(4096).values;
    const auto problem = sfbm::make_local_problem(1.0, 1.0, 0.5, kSpec.hurst, grid, std::move(driver));
    const auto cert = sfbm::select_delta(problem);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sfbm::picard_solve(problem, cert, static_cast<std::size_t>(state.range(0)), 1e-10).residual);
    }
}

}  // namespace

BENCHMARK(BM_SolveImplicit)->RangeMultiplier(4)->Range(1 << 10, 1 << 16);
BENCHMARK(BM_SolveExplicit)->RangeMultiplier(4)->Range(1 << 10, 1 << 16);
BENCHMARK(BM_Family)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Picard)->RangeMultiplier(4)->Range(1 << 10, 1 << 14)->Unit(benchmark::kMillisecond);
