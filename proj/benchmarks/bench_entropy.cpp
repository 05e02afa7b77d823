#include <benchmark/benchmark.h>

#include <cmath>

#include "itpcc/entropy.hpp"
#include "itpcc/tensor.hpp"

using namespace itpcc;

static void BM_RangeCodeGaussian(benchmark::State& state) {
    Rng rng(1);
    const int n = int(state.range(0));
    std::vector<int32_t> symbols;
    std::vector<SymbolModel> models;
    for (int i = 0; i < n; ++i) {
        double mu = rng.uniform(-20.0, 20.0);
        double sigma = std::exp(rng.uniform(std::log(0.1), std::log(10.0)));
        symbols.push_back(int32_t(std::lround(mu + rng.normal() * sigma)));
        models.push_back(build_symbol_model(mu, sigma));
    }
    for (auto _ : state) {
        auto bytes = range_encode(symbols, models);
        auto back = range_decode(bytes, models);
        benchmark::DoNotOptimize(back);
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_RangeCodeGaussian)->Arg(10000)->Arg(100000);

static void BM_BuildSymbolModel(benchmark::State& state) {
    Rng rng(2);
    for (auto _ : state) {
        auto m = build_symbol_model(rng.uniform(-20.0, 20.0), rng.uniform(0.1, 10.0));
        benchmark::DoNotOptimize(m);
    }
}
BENCHMARK(BM_BuildSymbolModel);
