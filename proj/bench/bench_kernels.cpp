// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <random>

#include "ahgcn/kernels.hpp"

using namespace ahgcn;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    Matrix m(r, c);
    for (double& v : m.values()) v = d(rng);
    return m;
}

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
    for (auto _ : state) {
        Matrix c = Parallel ? kernels::matmul(a, b) : kernels::reference::matmul(a, b);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <bool Parallel>
void BM_ReducePool(benchmark::State& state) {
    const auto channels = static_cast<std::size_t>(state.range(0));
    const std::size_t extent = 32;
    const Matrix values = random_matrix(1, channels * extent * extent, 3);
    const Matrix weight = random_matrix(channels, 16, 4), bias = random_matrix(1, 16, 5);
    const kernels::MapView view{values.values(), channels, extent, extent};
    for (auto _ : state) {
        auto pooled = Parallel ? kernels::reduce_pool(view, weight, bias, 8)
                               : kernels::reference::reduce_pool(view, weight, bias, 8);
        benchmark::DoNotOptimize(pooled.pooled.data());
    }
}

}  // namespace

BENCHMARK(BM_Matmul<false>)->Name("matmul/reference")->Arg(64)->Arg(256);
BENCHMARK(BM_Matmul<true>)->Name("matmul/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_ReducePool<false>)->Name("reduce_pool/reference")->Arg(128)->Arg(512);
BENCHMARK(BM_ReducePool<true>)->Name("reduce_pool/parallel")->Arg(128)->Arg(512);

BENCHMARK_MAIN();
