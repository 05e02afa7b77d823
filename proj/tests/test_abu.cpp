#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "itpcc/abu.hpp"
#include "itpcc/sampling.hpp"

using namespace itpcc;

namespace {

AbuArch toy_arch(int base = 2, int stages = 2, int sf = 2) {
    AbuArch a;
    a.base = base;
    a.stages = stages;
    a.sf = sf;
    return a;
}

Tensor<double> random_block(Rng& rng, int size, double fill) {
    Tensor<double> x({1, 1, size, size, size});
    for (auto& v : x.data) v = rng.uniform() < fill ? 1.0 : 0.0;
    x.data[0] = 1.0;
    return x;
}

// z=k plane rendered into a block, the synthetic shape used for ABU
// smoke training
VoxelBlock plane_block(int size, int k) {
    VoxelBlock b;
    b.size = size;
    b.channels = 1;
    b.data.assign(b.voxels(), 0.0f);
    for (int x = 0; x < size; ++x)
        for (int y = 0; y < size; ++y) b.at(0, x, y, k) = 1.0f;
    b.n_input = uint32_t(size) * size;
    return b;
}

VoxelBlock degrade(const VoxelBlock& orig, int sf) {
    std::vector<Vec3i> pts;
    block_points(orig, pts, nullptr);
    PointCloud pc = make_cloud(std::move(pts));
    PointCloud up = upsample_basic(downsample(pc, sf), sf);
    VoxelBlock out;
    out.size = orig.size;
    out.channels = 1;
    out.data.assign(out.voxels(), 0.0f);
    out.n_input = orig.n_input;
    for (const auto& p : up.points)
        if (p[0] < orig.size && p[1] < orig.size && p[2] < orig.size)
            out.at(0, p[0], p[1], p[2]) = 1.0f;
    return out;
}

}  // namespace

TEST_CASE("abu forward shape, range, determinism") {
    AbuModel<double> model(toy_arch(), 31);
    Rng rng(1);
    auto x = random_block(rng, 8, 0.2);
    auto y = model.forward(x);
    CHECK(y.shape == x.shape);
    for (double v : y.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(model.forward(x).data == y.data);

    Tensor<double> bad({1, 1, 6, 6, 6});  // 6 not divisible by 2^stages
    CHECK_THROWS(model.forward(bad));
}

TEST_CASE("abu gradient check") {
    AbuModel<double> model(toy_arch(), 32);
    Rng rng(2);
    auto input = random_block(rng, 8, 0.25);
    auto target = random_block(rng, 8, 0.25);
    TrainConfig cfg;

    auto params = model.params();
    for (auto* p : params) p->grad.fill(0.0);
    abu_distortion(model, input, target, cfg, true);

    Rng probe_rng(3);
    double worst = 0;
    for (auto* p : params) {
        for (int probe = 0; probe < 2; ++probe) {
            size_t j = probe_rng.next_below(p->value.data.size());
            double eps = 1e-5, orig = p->value.data[j];
            p->value.data[j] = orig + eps;
            double lp = abu_distortion(model, input, target, cfg, false);
            p->value.data[j] = orig - eps;
            double lm = abu_distortion(model, input, target, cfg, false);
            p->value.data[j] = orig;
            double fd = (lp - lm) / (2 * eps);
            double an = p->grad.data[j];
            double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
            worst = std::max(worst, std::abs(fd - an) / denom);
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("train_abu preconditions") {
    AbuModel<float> model(toy_arch(), 33);
    TrainConfig cfg;
    CHECK_THROWS(train_abu(model, {}, {}, 2, cfg));
    AbuPair pair{plane_block(8, 3), plane_block(8, 3)};
    CHECK_THROWS(train_abu(model, {pair}, {}, 1, cfg));
}

TEST_CASE("train_abu smoke: distortion decreases on plane blocks") {
    AbuModel<float> model(toy_arch(), 34);
    std::vector<AbuPair> pairs;
    for (int k = 2; k <= 5; ++k) pairs.push_back({degrade(plane_block(8, k), 2),
                                                  plane_block(8, k)});
    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.max_epochs = 15;
    cfg.seed = 4;
    auto res = train_abu(model, pairs, {}, 2, cfg);
    CHECK(res.final_train_loss < res.initial_train_loss);
    CHECK(res.best_val_loss <= res.val_history.front());
}

TEST_CASE("abu checkpoint arch json round trip") {
    AbuArch a = toy_arch(4, 3, 4);
    auto b = AbuArch::from_json(a.to_json());
    CHECK(b.base == 4);
    CHECK(b.stages == 3);
    CHECK(b.sf == 4);
    CHECK_THROWS(AbuArch::from_json(CodecArch{}.to_json()));
}
