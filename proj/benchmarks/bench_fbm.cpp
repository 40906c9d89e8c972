#include "sfbm/fbm.hpp"

#include <benchmark/benchmark.h>

namespace {

void generate(benchmark::State& state, sfbm::GeneratorTag tag) {
    const sfbm::TimeGrid grid(1.0, static_cast<std::size_t>(state.range(0)));
    const sfbm::HurstParam hurst(0.25);
    std::uint64_t path = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sfbm::generate_fbm(grid, hurst, {42, path++}, tag).values.data());
    }
    state.SetComplexityN(state.range(0));
}

void BM_Circulant(benchmark::State& state) { generate(state, sfbm::GeneratorTag::circulant); }
void BM_Hosking(benchmark::State& state) { generate(state, sfbm::GeneratorTag::hosking); }
void BM_Cholesky(benchmark::State& state) { generate(state, sfbm::GeneratorTag::cholesky); }

void BM_Holder(benchmark::State& state) {
    const sfbm::TimeGrid grid(1.0, static_cast<std::size_t>(state.range(0)));
    const auto path = sfbm::generate_fbm(grid, sfbm::HurstParam(0.25), {42, 0});
    for (auto _ : state) benchmark::DoNotOptimize(sfbm::estimate_holder(path.values, grid, 0.125).constant);
}

}  // namespace

BENCHMARK(BM_Circulant)->RangeMultiplier(4)->Range(1 << 10, 1 << 16)->Complexity();
BENCHMARK(BM_Hosking)->RangeMultiplier(4)->Range(1 << 8, 1 << 12)->Complexity();
BENCHMARK(BM_Cholesky)->RangeMultiplier(2)->Range(1 << 8, 1 << 11);
BENCHMARK(BM_Holder)->RangeMultiplier(4)->Range(1 << 8, 1 << 12);
