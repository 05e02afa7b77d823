#include <benchmark/benchmark.h>

#include "itpcc/nn.hpp"

using namespace itpcc;
using namespace itpcc::nn;

static void BM_Conv3dForward(benchmark::State& state) {
    Rng rng(1);
    int b = int(state.range(0));
    Conv3d<float> conv("c", 8, 16, 3, 2, false, rng);
    Tensor<float> x({1, 8, b, b, b});
    for (auto& v : x.data) v = float(rng.uniform(-1.0, 1.0));
    for (auto _ : state) {
        auto y = conv.forward(x);
        benchmark::DoNotOptimize(y);
    }
}
BENCHMARK(BM_Conv3dForward)->Arg(16)->Arg(32);

static void BM_IrbForward(benchmark::State& state) {
    Rng rng(2);
    int b = int(state.range(0));
    Irb<float> irb("i", 16, {1, 3}, rng);
    Tensor<float> x({1, 16, b, b, b});
    for (auto& v : x.data) v = float(rng.uniform(-1.0, 1.0));
    for (auto _ : state) {
        auto y = irb.forward(x);
        benchmark::DoNotOptimize(y);
    }
}
BENCHMARK(BM_IrbForward)->Arg(8)->Arg(16);
