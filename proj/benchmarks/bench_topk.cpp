#include <benchmark/benchmark.h>

#include "itpcc/binarization.hpp"
#include "itpcc/tensor.hpp"

using namespace itpcc;

static void BM_TopK(benchmark::State& state) {
    Rng rng(3);
    int b = int(state.range(0));
    VoxelBlock probs;
    probs.size = b;
    probs.channels = 1;
    probs.data.resize(probs.voxels());
    for (auto& v : probs.data) v = float(rng.uniform());
    OctantMask mask;
    mask.bits = 0xFF;
    int k = int(probs.voxels() / 50);
    for (auto _ : state) {
        auto bin = top_k(probs, k, mask);
        benchmark::DoNotOptimize(bin);
    }
}
BENCHMARK(BM_TopK)->Arg(32)->Arg(64);

BENCHMARK_MAIN();
