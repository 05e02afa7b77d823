// Acceptance suite: one pass/fail line per criterion, nonzero exit on
// any failure. Each criterion is independent; a thrown exception fails
// only its own criterion.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "itpcc/abu.hpp"
#include "itpcc/checkpoint.hpp"
#include "itpcc/codec.hpp"
#include "itpcc/coding_model.hpp"
#include "itpcc/entropy.hpp"
#include "itpcc/nn.hpp"
#include "itpcc/ply.hpp"
#include "itpcc/quality.hpp"
#include "itpcc/sampling.hpp"

using namespace itpcc;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void run_criterion(int idx, const std::string& name,
                   const std::function<void()>& body) {
    std::string detail;
    bool ok = true;
    try {
        body();
    } catch (const std::exception& e) {
        ok = false;
        detail = e.what();
    }
    if (ok) {
        std::printf("criterion %2d: %-58s PASS\n", idx, name.c_str());
    } else {
        std::printf("criterion %2d: %-58s FAIL (%s)\n", idx, name.c_str(),
                    detail.c_str());
        ++g_failures;
    }
    std::fflush(stdout);
}

void require(bool cond, const std::string& what) {
    if (!cond) throw std::runtime_error(what);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

// ---------- shared synthetic data ----------

Tensor<double> random_binary_block(Rng& rng, int size, double fill,
                                   int channels = 1) {
    Tensor<double> x({1, channels, size, size, size});
    for (int d = 0; d < size; ++d)
        for (int h = 0; h < size; ++h)
            for (int w = 0; w < size; ++w) {
                bool on = rng.uniform() < fill;
                x(0, 0, d, h, w) = on ? 1.0 : 0.0;
                for (int c = 1; c < channels; ++c)
                    x(0, c, d, h, w) = on ? rng.uniform() : 0.0;
            }
    x(0, 0, 0, 0, 0) = 1.0;
    return x;
}

PointCloud random_cloud(Rng& rng, int n, int extent, bool with_color = false) {
    std::vector<Vec3i> pts;
    std::vector<Rgb> cols;
    for (int i = 0; i < n; ++i) {
        pts.push_back({int32_t(rng.next_below(uint64_t(extent))),
                       int32_t(rng.next_below(uint64_t(extent))),
                       int32_t(rng.next_below(uint64_t(extent)))});
        if (with_color)
            cols.push_back({uint8_t(rng.next_below(256)),
                            uint8_t(rng.next_below(256)),
                            uint8_t(rng.next_below(256))});
    }
    return make_cloud(std::move(pts), std::move(cols));
}

// Axis-aligned surface patch rendered into a 16-cube block.
VoxelBlock surface_block(Rng& rng) {
    VoxelBlock b;
    b.size = 16;
    b.channels = 1;
    b.data.assign(b.voxels(), 0.0f);
    int axis = int(rng.next_below(3));
    int off = int(rng.next_below(16));
    int tilt = int(rng.next_below(3)) - 1;  // mild slope for variety
    for (int u = 0; u < 16; ++u)
        for (int v = 0; v < 16; ++v) {
            int w = std::clamp(off + tilt * (u / 8), 0, 15);
            int c[3];
            c[axis] = w;
            c[(axis + 1) % 3] = u;
            c[(axis + 2) % 3] = v;
            b.at(0, c[0], c[1], c[2]) = 1.0f;
        }
    uint32_t n = 0;
    for (float x : b.data)
        if (x > 0.5f) ++n;
    b.n_input = n;
    return b;
}

// Plane with normal along `axis` at offset k, in-plane coordinates on
// the even sub-grid so the down/up-sampled rendering differs only by
// the one-voxel offset shift.
VoxelBlock sparse_plane(int size, int axis, int k) {
    VoxelBlock b;
    b.size = size;
    b.channels = 1;
    b.data.assign(b.voxels(), 0.0f);
    for (int u = 0; u < size; u += 2)
        for (int v = 0; v < size; v += 2) {
            int c[3];
            c[axis] = k;
            c[(axis + 1) % 3] = u;
            c[(axis + 2) % 3] = v;
            b.at(0, c[0], c[1], c[2]) = 1.0f;
        }
    uint32_t n = 0;
    for (float x : b.data)
        if (x > 0.5f) ++n;
    b.n_input = n;
    return b;
}

// Down-then-up-sampled rendering of a block at the original frame.
VoxelBlock degrade(const VoxelBlock& orig, int sf) {
    std::vector<Vec3i> pts;
    block_points(orig, pts, nullptr);
    PointCloud up = upsample_basic(downsample(make_cloud(std::move(pts)), sf), sf);
    VoxelBlock out;
    out.size = orig.size;
    out.channels = 1;
    out.data.assign(out.voxels(), 0.0f);
    for (const auto& p : up.points)
        if (p[0] < orig.size && p[1] < orig.size && p[2] < orig.size)
            out.at(0, p[0], p[1], p[2]) = 1.0f;
    uint32_t n = 0;
    for (float x : out.data)
        if (x > 0.5f) ++n;
    out.n_input = n;
    return out;
}

PointCloud block_cloud(const VoxelBlock& b) {
    std::vector<Vec3i> pts;
    block_points(b, pts, nullptr);
    return make_cloud(std::move(pts));
}

CodecArch toy_codec_arch(int width, int in_channels = 1) {
    CodecArch a;
    a.in_channels = in_channels;
    a.width = width;
    return a;
}

size_t payload_bytes(const Bitstream& bs) {
    size_t total = 0;
    for (const auto& r : bs.blocks) total += r.side.size() + r.main.size();
    return total;
}

std::set<std::array<int32_t, 3>> point_set(const PointCloud& pc) {
    std::set<std::array<int32_t, 3>> s;
    for (const auto& p : pc.points) s.insert({p[0], p[1], p[2]});
    return s;
}

// ---------- finite-difference helpers (criterion 2) ----------

double layer_grad_worst(nn::Layer<double>& layer, Tensor<double> x, Rng& rng) {
    Tensor<double> y = layer.forward(x);
    Tensor<double> r(y.shape);
    for (auto& v : r.data) v = rng.uniform(-1.0, 1.0);
    auto loss = [&](const Tensor<double>& xx) {
        Tensor<double> yy = layer.forward(xx);
        double s = 0;
        for (size_t i = 0; i < yy.data.size(); ++i) s += r.data[i] * yy.data[i];
        return s;
    };
    std::vector<nn::Param<double>*> params;
    layer.collect(params);
    for (auto* p : params) p->grad.fill(0.0);
    layer.forward(x);
    Tensor<double> dx = layer.backward(r);

    const double eps = 1e-5;
    double worst = 0;
    for (int probe = 0; probe < 12; ++probe) {
        size_t i = rng.next_below(x.count());
        Tensor<double> xp = x, xm = x;
        xp.data[i] += eps;
        xm.data[i] -= eps;
        double num = (loss(xp) - loss(xm)) / (2 * eps);
        double denom = std::max({std::abs(num), std::abs(dx.data[i]), 1e-4});
        worst = std::max(worst, std::abs(num - dx.data[i]) / denom);
    }
    for (auto* p : params)
        for (int probe = 0; probe < 6; ++probe) {
            size_t i = rng.next_below(p->value.count());
            double orig = p->value.data[i];
            p->value.data[i] = orig + eps;
            double lp = loss(x);
            p->value.data[i] = orig - eps;
            double lm = loss(x);
            p->value.data[i] = orig;
            double num = (lp - lm) / (2 * eps);
            double denom = std::max({std::abs(num), std::abs(p->grad.data[i]), 1e-4});
            worst = std::max(worst, std::abs(num - p->grad.data[i]) / denom);
        }
    return worst;
}

// ---------- CLI helpers (criterion 13) ----------

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    std::string cmd = std::string(ITPCC_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) throw std::runtime_error("popen failed");
    RunResult r;
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
    int status = pclose(pipe);
    r.exit_code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

// =====================================================================

int main() {
    run_criterion(1, "entropy round trip, 1e6 fuzzed symbols, < 60 s", [] {
        auto t0 = std::chrono::steady_clock::now();
        Rng rng(2024);
        const int n = 1000000;
        std::vector<int32_t> symbols;
        std::vector<SymbolModel> models;
        symbols.reserve(n);
        models.reserve(n);
        double est_bits = 0;
        for (int i = 0; i < n; ++i) {
            double mu = rng.uniform(-100.0, 100.0);
            double sigma = std::exp(rng.uniform(std::log(1e-3), std::log(50.0)));
            int32_t q = int32_t(std::lround(mu + rng.normal() * sigma));
            if (rng.next_below(997) == 0) q = int32_t(rng.next_u64());  // escapes
            SymbolModel m = build_symbol_model(mu, sigma);
            if (q >= m.q_min && q <= m.q_max) {
                int slot = q - m.q_min;
                est_bits +=
                    -std::log2(double(m.cdf[slot + 1] - m.cdf[slot]) / 65536.0);
            } else {
                // escape: slot mass plus 4 raw bytes under the flat model
                int slot = m.escape_slot();
                est_bits +=
                    -std::log2(double(m.cdf[slot + 1] - m.cdf[slot]) / 65536.0) +
                    32.0;
            }
            symbols.push_back(q);
            models.push_back(std::move(m));
        }
        auto bytes = range_encode(symbols, models);
        require(range_decode(bytes, models) == symbols, "lossy round trip");
        double actual_bits = double(bytes.size() - 4) * 8.0;
        require(actual_bits <= est_bits * 1.01 + 64.0,
                "payload exceeds entropy bound");
        double dt = seconds_since(t0);
        require(dt < 60.0, "took " + std::to_string(dt) + " s");
    });

    run_criterion(2, "gradient suite: layers < 1e-6, full toy codec < 1e-4", [] {
        Rng rng(31);
        {
            nn::Conv3d<double> conv("c", 2, 3, 3, 1, false, rng);
            Tensor<double> x({1, 2, 5, 5, 5});
            for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
            require(layer_grad_worst(conv, x, rng) < 1e-6, "conv3d");
        }
        {
            nn::Conv3d<double> conv("c", 2, 3, 5, 2, false, rng);
            Tensor<double> x({1, 2, 6, 6, 6});
            for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
            require(layer_grad_worst(conv, x, rng) < 1e-6, "strided conv3d");
        }
        {
            nn::Conv3d<double> tconv("t", 3, 2, 5, 2, true, rng);
            Tensor<double> x({1, 3, 3, 3, 3});
            for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
            require(layer_grad_worst(tconv, x, rng) < 1e-6, "transposed conv3d");
        }
        {
            nn::Irb<double> irb("i", 6, {1, 3, 5}, rng);
            Tensor<double> x({1, 6, 4, 4, 4});
            for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
            require(layer_grad_worst(irb, x, rng) < 1e-6, "irb");
        }
        {
            // focal loss: analytic dL/dv vs central differences
            Tensor<double> u({1, 1, 4, 4, 4}), v({1, 1, 4, 4, 4});
            for (size_t i = 0; i < u.data.size(); ++i) {
                u.data[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
                v.data[i] = rng.uniform(0.05, 0.95);
            }
            Tensor<double> dv;
            nn::focal_loss<double>(u, v, 0.7, 2.0, &dv);
            const double eps = 1e-6;
            for (int probe = 0; probe < 12; ++probe) {
                size_t i = rng.next_below(v.count());
                Tensor<double> vp = v, vm = v;
                vp.data[i] += eps;
                vm.data[i] -= eps;
                double num = (nn::focal_loss<double>(u, vp, 0.7, 2.0) -
                              nn::focal_loss<double>(u, vm, 0.7, 2.0)) /
                             (2 * eps);
                double denom = std::max({std::abs(num), std::abs(dv.data[i]), 1e-4});
                require(std::abs(num - dv.data[i]) / denom < 1e-6, "focal loss");
            }
        }
        {
            // full toy codec on the smallest legal block, width 8
            CodingModel<double> model(toy_codec_arch(8), 41);
            auto x = random_binary_block(rng, 8, 0.35);
            TrainConfig cfg;
            cfg.lambda = 0.005;
            const uint64_t seed = 77;
            auto params = model.params();
            for (auto* p : params) p->grad.fill(0.0);
            model.step_loss(x, cfg, seed, true, true);
            double worst = 0;
            for (auto* p : params)
                for (int probe = 0; probe < 2; ++probe) {
                    size_t j = rng.next_below(p->value.data.size());
                    double eps = 1e-5, orig = p->value.data[j];
                    p->value.data[j] = orig + eps;
                    double lp = model.step_loss(x, cfg, seed, true, false).loss;
                    p->value.data[j] = orig - eps;
                    double lm = model.step_loss(x, cfg, seed, true, false).loss;
                    p->value.data[j] = orig;
                    double fd = (lp - lm) / (2 * eps);
                    double an = p->grad.data[j];
                    double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
                    worst = std::max(worst, std::abs(fd - an) / denom);
                }
            require(worst < 1e-4,
                    "end-to-end worst rel err " + std::to_string(worst));
        }
    });

    run_criterion(3, "focal loss point values within 1e-6", [] {
        Tensor<double> u({1, 1, 1, 1, 1}), v({1, 1, 1, 1, 1});
        u.data[0] = 1.0;
        v.data[0] = 0.5;
        require(std::abs(nn::focal_loss<double>(u, v, 0.7, 2.0) - 0.121300) < 1e-6,
                "u=1 value");
        u.data[0] = 0.0;
        require(std::abs(nn::focal_loss<double>(u, v, 0.7, 2.0) - 0.051986) < 1e-6,
                "u=0 value");
    });

    run_criterion(4, "lossless-capable path (k=n and single-point cloud)", [] {
        // (a) perfect probabilities + k = n_input reproduce the block
        Rng rng(51);
        for (int t = 0; t < 5; ++t) {
            VoxelBlock src;
            src.size = 8;
            src.channels = 1;
            src.data.assign(src.voxels(), 0.0f);
            for (auto& v : src.data) v = rng.uniform() < 0.2 ? 1.0f : 0.0f;
            src.data[0] = 1.0f;
            uint32_t n = 0;
            for (float v : src.data)
                if (v > 0.5f) ++n;
            src.n_input = n;
            VoxelBlock out = top_k(src, n, octant_occupancy(src));
            require(out.data == src.data, "k = n_input not lossless");
        }

        // (b) full pipeline on a single point: overfit a tiny model so
        // the decoded probability peaks at the source voxel
        PointCloud pc = make_cloud({{5, 9, 13}});
        VoxelBlock blk = extract_block(pc, {0, 0, 0}, 16, false);
        std::vector<VoxelBlock> data{blk};
        CodingModel<float> model(toy_codec_arch(3), 52);
        TrainConfig tc;
        tc.lambda = 1e-4;
        tc.lr = 5e-3;
        tc.max_epochs = 400;
        tc.patience = 400;
        train(model, data, {}, tc);

        EncoderConfig cfg;
        cfg.blk_size = 16;
        cfg.sf = 1.0;
        Bitstream bs = encode(pc, model, nullptr, cfg);
        require(bs.blocks.size() == 1, "expected one block record");
        require(bs.blocks[0].k_codec == 1, "expected k_codec = 1");
        PointCloud dec = decode(bs, model, nullptr);
        require(point_set(dec) == point_set(pc), "point not reproduced");
    });

    run_criterion(5, "partition/merge and PLY round trips, 1000 clouds", [] {
        Rng rng(61);
        fs::path dir = fs::temp_directory_path() / "itpcc_accept_ply";
        fs::create_directories(dir);
        std::string path = (dir / "rt.ply").string();
        for (int t = 0; t < 1000; ++t) {
            bool color = (t % 2) == 1;
            PointCloud pc =
                random_cloud(rng, 1 + int(rng.next_below(80)), 40, color);
            PointCloud merged = merge(partition(pc, 8, color));
            require(point_set(merged) == point_set(pc), "partition/merge points");
            if (color) require(merged.colors == pc.colors, "partition/merge colours");

            save_ply(pc, path);
            PointCloud loaded = load_ply(path);
            require(point_set(loaded) == point_set(pc), "ply points");
            if (color) require(loaded.colors == pc.colors, "ply colours");
        }
        fs::remove_all(dir);
    });

    run_criterion(6, "sampling bound <= ceil(sf/2) for sf in {2,4}", [] {
        Rng rng(71);
        for (int sf : {2, 4}) {
            int bound = (sf + 1) / 2;
            for (int t = 0; t < 50; ++t) {
                PointCloud pc = random_cloud(rng, 1 + int(rng.next_below(300)), 200);
                PointCloud up = upsample_basic(downsample(pc, sf), sf);
                auto ups = point_set(up);
                for (const auto& p : pc.points) {
                    Vec3i img{int32_t(round_half_away(double(p[0]) / sf)) * sf,
                              int32_t(round_half_away(double(p[1]) / sf)) * sf,
                              int32_t(round_half_away(double(p[2]) / sf)) * sf};
                    require(ups.count({img[0], img[1], img[2]}) == 1,
                            "image point missing");
                    for (int a = 0; a < 3; ++a)
                        require(std::abs(p[a] - img[a]) <= bound, "bound exceeded");
                }
            }
        }
    });

    run_criterion(7, "metric oracles (brute force + 64.97 dB example)", [] {
        Rng rng(81);
        auto brute_mse = [](const PointCloud& from, const PointCloud& to) {
            double total = 0;
            for (const auto& p : from.points) {
                double best = 1e300;
                for (const auto& q : to.points) {
                    double d = 0;
                    for (int a = 0; a < 3; ++a) {
                        double v = double(p[a]) - q[a];
                        d += v * v;
                    }
                    best = std::min(best, d);
                }
                total += best;
            }
            return total / double(from.points.size());
        };
        for (int t = 0; t < 10; ++t) {
            PointCloud a = random_cloud(rng, 30 + int(rng.next_below(470)), 80);
            PointCloud b = random_cloud(rng, 30 + int(rng.next_below(470)), 80);
            double mse = std::max(brute_mse(a, b), brute_mse(b, a));
            double expect = 10.0 * std::log10(3.0 * 1023.0 * 1023.0 / mse);
            require(std::abs(psnr_d1(a, b, 10) - expect) < 1e-9, "d1 brute force");
        }
        // constructed D1 example: unit offset at precision 10
        PointCloud a = make_cloud({{5, 5, 5}});
        PointCloud b = make_cloud({{5, 5, 6}});
        require(std::abs(psnr_d1(a, b, 10) - 64.97) < 0.01, "64.97 dB example");

        // D2: unit normal displacement of a dense plane -> MSE exactly 1
        std::vector<Vec3i> ref_pts, off_pts;
        for (int x = 0; x < 20; ++x)
            for (int y = 0; y < 20; ++y) {
                ref_pts.push_back({x, y, 0});
                off_pts.push_back({x, y, 1});
            }
        PointCloud ref = make_cloud(std::move(ref_pts));
        PointCloud off = make_cloud(std::move(off_pts));
        double expect2 = 10.0 * std::log10(3.0 * 1023.0 * 1023.0);
        require(std::abs(psnr_d2(ref, off, 10) - expect2) < 1e-6, "d2 plane");

        // colour PSNR against the brute-force YUV oracle
        auto yuv = [](const Rgb& c) {
            double y = 0.2126 * c[0] + 0.7152 * c[1] + 0.0722 * c[2];
            return std::array<double, 3>{y, (c[2] - y) / 1.8556,
                                         (c[0] - y) / 1.5748};
        };
        for (int t = 0; t < 5; ++t) {
            PointCloud ca = random_cloud(rng, 60, 32, true);
            PointCloud cb = random_cloud(rng, 70, 32, true);
            auto dir = [&](const PointCloud& f, const PointCloud& g) {
                double acc = 0;
                for (size_t i = 0; i < f.points.size(); ++i) {
                    double best = 1e300;
                    size_t bi = 0;
                    for (size_t j = 0; j < g.points.size(); ++j) {
                        double d = 0;
                        for (int x = 0; x < 3; ++x) {
                            double v = double(f.points[i][x]) - g.points[j][x];
                            d += v * v;
                        }
                        if (d < best) {
                            best = d;
                            bi = j;
                        }
                    }
                    double dy = yuv(f.colors[i])[0] - yuv(g.colors[bi])[0];
                    acc += dy * dy;
                }
                return acc / double(f.points.size());
            };
            double y_mse = std::max(dir(cb, ca), dir(ca, cb));
            double expect_y = 10.0 * std::log10(255.0 * 255.0 / y_mse);
            require(std::abs(psnr_color(ca, cb).y - expect_y) < 1e-9,
                    "colour brute force");
        }
    });

    run_criterion(8, "BD oracles (identity, +2 dB, x2 rate)", [] {
        RdCurve a = {{0.05, 60.0}, {0.15, 66.0}, {0.5, 71.0}, {1.5, 74.0}};
        auto self = bd_metrics(a, a);
        require(std::abs(self.bd_rate_percent) < 1e-9 &&
                    std::abs(self.bd_quality) < 1e-9,
                "identity");
        RdCurve up = a;
        for (auto& p : up) p.quality += 2.0;
        require(std::abs(bd_metrics(a, up).bd_quality - 2.0) < 1e-6, "+2 dB");
        RdCurve wide = a;
        for (auto& p : wide) p.rate *= 2.0;
        require(std::abs(bd_metrics(a, wide).bd_rate_percent - 100.0) < 0.1,
                "x2 rate");
    });

    run_criterion(9, "training smoke (50 blocks, patience, lambda sweep)", [] {
        auto t0 = std::chrono::steady_clock::now();
        Rng rng(91);
        std::vector<VoxelBlock> blocks;
        for (int i = 0; i < 50; ++i) blocks.push_back(surface_block(rng));

        TrainConfig tc;
        tc.lambda = 0.0005;
        tc.lr = 5e-3;
        tc.batch = 8;
        tc.max_epochs = 10;
        tc.patience = 10;
        tc.seed = 5;

        auto mean_eval_loss = [&](CodingModel<float>& m) {
            double total = 0;
            for (const auto& b : blocks)
                total += m.step_loss(block_to_tensor<float>(b), tc, 0, false, false)
                             .loss;
            return total / double(blocks.size());
        };
        {
            CodingModel<float> model(toy_codec_arch(3), 92);
            double untrained = mean_eval_loss(model);
            auto res = train(model, blocks, {}, tc);
            require(res.epochs <= 10, "epoch budget");
            double trained = mean_eval_loss(model);
            require(trained < 0.5 * untrained,
                    "loss only reached " + std::to_string(trained / untrained) +
                        " of untrained");
        }
        {
            // frozen optimizer: validation never improves after epoch 1
            CodingModel<float> model(toy_codec_arch(3), 92);
            TrainConfig frozen = tc;
            frozen.lr = 0.0;
            frozen.patience = 5;
            frozen.max_epochs = 50;
            auto res = train(model, blocks, {}, frozen);
            require(res.epochs == 6, "patience-5 halt");
        }
        {
            VoxelBlock held_out = surface_block(rng);
            PointCloud held_cloud = block_cloud(held_out);
            EncoderConfig cfg;
            cfg.blk_size = 16;
            cfg.sf = 1.0;
            size_t bits[2];
            double lambdas[2] = {0.00025, 0.01};
            for (int i = 0; i < 2; ++i) {
                CodingModel<float> model(toy_codec_arch(3), 93);
                TrainConfig lt = tc;
                lt.lambda = lambdas[i];
                train(model, blocks, {}, lt);
                bits[i] = payload_bytes(encode(held_cloud, model, nullptr, cfg));
            }
            require(bits[1] < bits[0],
                    "larger lambda coded " + std::to_string(bits[1]) +
                        " bytes vs " + std::to_string(bits[0]));
        }
        double dt = seconds_since(t0);
        require(dt < 600.0, "took " + std::to_string(dt) + " s");
        std::printf("              (training smoke ran in %.1f s)\n", dt);
    });

    run_criterion(10, "coded bits non-increasing over the QS grid", [] {
        Rng rng(101);
        CodingModel<float> model(toy_codec_arch(3), 102);
        std::vector<VoxelBlock> blocks{surface_block(rng), surface_block(rng)};
        TrainConfig tc;
        tc.lr = 1e-3;
        tc.max_epochs = 5;
        train(model, blocks, {}, tc);

        PointCloud pc = block_cloud(surface_block(rng));
        EncoderConfig cfg;
        cfg.blk_size = 16;
        cfg.sf = 1.0;
        size_t prev = SIZE_MAX;
        for (double qs : {1.0, 1.1, 1.25, 1.45, 2.0}) {
            cfg.qs = qs;
            size_t bytes = payload_bytes(encode(pc, model, nullptr, cfg));
            require(bytes <= prev, "payload grew at qs " + std::to_string(qs));
            prev = bytes;
        }
    });

    run_criterion(11, "random access equals filtered full decode", [] {
        Rng rng(111);
        CodingModel<float> model(toy_codec_arch(3), 112);
        PointCloud pc = random_cloud(rng, 600, 64);
        EncoderConfig cfg;
        cfg.blk_size = 16;
        cfg.sf = 1.0;
        Bitstream bs = encode(pc, model, nullptr, cfg);
        require(bs.blocks.size() >= 4, "need several blocks");
        PointCloud full = decode(bs, model, nullptr);

        for (int trial = 0; trial < 5; ++trial) {
            std::vector<size_t> idx;
            for (size_t i = 0; i < bs.blocks.size(); ++i)
                if (rng.uniform() < 0.4) idx.push_back(i);
            if (idx.empty()) idx.push_back(rng.next_below(bs.blocks.size()));

            std::set<std::array<int32_t, 3>> expect;
            for (const auto& p : full.points)
                for (size_t i : idx) {
                    const auto& rec = bs.blocks[i];
                    bool inside = true;
                    for (int a = 0; a < 3; ++a) {
                        int lo = int(rec.pos[a]) * 16;
                        if (p[a] < lo || p[a] >= lo + 16) inside = false;
                    }
                    if (inside) expect.insert({p[0], p[1], p[2]});
                }
            PointCloud sub = decode_blocks(bs, model, nullptr, idx);
            require(point_set(sub) == expect, "subset mismatch");
        }
    });

    run_criterion(12, "ABU beats basic up-sampling; payload unchanged", [] {
        // Planes at odd offsets land one voxel off after basic
        // up-sampling; the model learns the shift from three training
        // offsets per orientation and is scored on an unseen offset.
        AbuArch arch;
        arch.in_channels = 1;
        arch.base = 4;
        arch.stages = 2;
        arch.sf = 2;
        AbuModel<float> model(arch, 121);
        std::vector<AbuPair> pairs;
        for (int axis : {1, 2})
            for (int k : {1, 5, 13})
                pairs.push_back({degrade(sparse_plane(16, axis, k), 2),
                                 sparse_plane(16, axis, k)});
        TrainConfig tc;
        tc.lr = 1e-3;
        tc.max_epochs = 60;
        tc.patience = 60;
        tc.seed = 6;
        train_abu(model, pairs, {}, 2, tc);

        for (int axis : {1, 2}) {
            VoxelBlock truth = sparse_plane(16, axis, 9);
            VoxelBlock basic = degrade(truth, 2);
            Tensor<float> prob_t = model.forward(block_to_tensor<float>(basic));
            VoxelBlock prob = tensor_to_block(prob_t, {0, 0, 0}, basic.n_input);
            VoxelBlock abu_sel = top_k(prob, basic.n_input, octant_occupancy(basic));

            PointCloud truth_pc = block_cloud(truth);
            double d1_basic = psnr_d1(truth_pc, block_cloud(basic), 10);
            double d1_abu = psnr_d1(truth_pc, block_cloud(abu_sel), 10);
            require(d1_abu > d1_basic,
                    "axis " + std::to_string(axis) + ": abu " +
                        std::to_string(d1_abu) + " dB vs basic " +
                        std::to_string(d1_basic) + " dB");
        }

        // codec payload is byte-identical with ABU on and off
        Rng rng(122);
        CodingModel<float> codec(toy_codec_arch(3), 123);
        PointCloud pc = random_cloud(rng, 500, 64);
        EncoderConfig cfg;
        cfg.blk_size = 16;
        cfg.sf = 2.0;
        Bitstream plain = encode(pc, codec, nullptr, cfg);
        cfg.use_abu = true;
        Bitstream with = encode(pc, codec, &model, cfg);
        require(plain.blocks.size() == with.blocks.size(), "block count");
        for (size_t i = 0; i < plain.blocks.size(); ++i) {
            require(plain.blocks[i].side == with.blocks[i].side, "side payload");
            require(plain.blocks[i].main == with.blocks[i].main, "main payload");
            require(plain.blocks[i].k_codec == with.blocks[i].k_codec, "k_codec");
        }
    });

    run_criterion(13, "CLI conformance and golden --helpfull", [] {
        // golden-file help listing
        RunResult help = run_cli("--helpfull");
        require(help.exit_code == 0, "--helpfull exit code");
        require(help.output == slurp(ITPCC_GOLDEN_HELPFULL),
                "--helpfull differs from golden file");
        require(run_cli("--with_color --helpfull").exit_code == 0,
                "--with_color rejected");

        fs::path dir = fs::temp_directory_path() / "itpcc_accept_cli";
        fs::remove_all(dir);
        fs::create_directories(dir / "model");
        fs::create_directories(dir / "abu");

        // tiny checkpoints and input cloud
        Rng rng(131);
        PointCloud pc = random_cloud(rng, 400, 32);
        save_ply(pc, (dir / "in.ply").string());
        {
            CodecArch arch = toy_codec_arch(3);
            CodingModel<float> model(arch, 132);
            auto params = model.params();
            save_checkpoint((dir / "model" / "codec.ckpt").string(),
                            snapshot_params(arch.to_json(), params));
        }
        {
            AbuArch arch;
            arch.in_channels = 1;
            arch.base = 2;
            arch.stages = 2;
            arch.sf = 2;
            AbuModel<float> model(arch, 133);
            auto params = model.params();
            save_checkpoint((dir / "abu" / "abu.ckpt").string(),
                            snapshot_params(arch.to_json(), params));
        }
        std::string in = (dir / "in.ply").string();
        std::string mdl = (dir / "model").string();

        // all flags spelled out at their documented defaults must code
        // byte-identically to the implicit-default invocation
        std::string out_a = (dir / "a").string(), out_b = (dir / "b").string();
        RunResult a = run_cli("compress " + in + " " + mdl + " " + out_a +
                              " --blk_size 16 --scale 1");
        require(a.exit_code == 0, "baseline compress failed: " + a.output);
        RunResult b = run_cli(
            "compress " + in + " " + mdl + " " + out_b +
            " --blk_size 16 --scale 1 --q_step 1 --topk_metrics d1yuv"
            " --color_weight 0.5 --max_topk 10 --topk_patience 5"
            " --abu_topk full --abu_max_topk 10");
        require(b.exit_code == 0, "explicit-defaults compress failed: " + b.output);
        require(slurp(out_a + "/in.bin") == slurp(out_b + "/in.bin"),
                "explicit defaults changed the bitstream");

        // remaining flags: fast top-k, ABU path, decompress
        RunResult c = run_cli("compress " + in + " " + mdl + " " +
                              (dir / "c").string() +
                              " --blk_size 16 --scale 2 --use_fast_topk"
                              " --use_abu --abu_model_dir " +
                              (dir / "abu").string());
        require(c.exit_code == 0, "abu compress failed: " + c.output);
        RunResult d = run_cli("decompress " + (dir / "c" / "in.bin").string() +
                              " " + mdl + " --abu_model_dir " +
                              (dir / "abu").string());
        require(d.exit_code == 0, "decompress failed: " + d.output);
        require(fs::exists(dir / "c" / "in.dec.ply"), "decoded ply missing");

        // failure diagnostics use a nonzero exit code
        RunResult bad = run_cli("decompress " + in + " " + mdl);
        require(bad.exit_code != 0, "corrupt input accepted");
        fs::remove_all(dir);
    });

    if (g_failures == 0) {
        std::printf("all criteria passed\n");
        return 0;
    }
    std::printf("%d criteria FAILED\n", g_failures);
    return 1;
}
