#include "itpcc/binarization.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "itpcc/quality.hpp"
#include "itpcc/sampling.hpp"

namespace itpcc {

TopKMetric parse_topk_metric(const std::string& name) {
    if (name == "d1") return TopKMetric::d1;
    if (name == "d2") return TopKMetric::d2;
    if (name == "d1yuv") return TopKMetric::d1yuv;
    if (name == "d2yuv") return TopKMetric::d2yuv;
    if (name == "d1rgb") return TopKMetric::d1rgb;
    if (name == "d2rgb") return TopKMetric::d2rgb;
    throw std::invalid_argument("unknown topk metric: " + name);
}

std::string to_string(TopKMetric m) {
    switch (m) {
        case TopKMetric::d1: return "d1";
        case TopKMetric::d2: return "d2";
        case TopKMetric::d1yuv: return "d1yuv";
        case TopKMetric::d2yuv: return "d2yuv";
        case TopKMetric::d1rgb: return "d1rgb";
        case TopKMetric::d2rgb: return "d2rgb";
    }
    return "?";
}

AbuTopKMode parse_abu_mode(const std::string& name) {
    if (name == "none") return AbuTopKMode::none;
    if (name == "full") return AbuTopKMode::full;
    if (name == "fast") return AbuTopKMode::fast;
    throw std::invalid_argument("unknown abu topk mode: " + name);
}

std::string to_string(AbuTopKMode m) {
    switch (m) {
        case AbuTopKMode::none: return "none";
        case AbuTopKMode::full: return "full";
        case AbuTopKMode::fast: return "fast";
    }
    return "?";
}

uint32_t topk_count(uint32_t n_input, double beta) {
    int32_t k = round_half_away(double(n_input) * beta);
    return uint32_t(std::max(k, 1));
}

VoxelBlock top_k(const VoxelBlock& prob_block, uint32_t k, OctantMask mask) {
    if (k == 0) throw std::invalid_argument("top_k: k must be positive");
    const int b = prob_block.size;

    struct Cand {
        float prob;
        size_t idx;
    };
    std::vector<Cand> cands;
    cands.reserve(prob_block.voxels());
    size_t idx = 0;
    for (int x = 0; x < b; ++x)
        for (int y = 0; y < b; ++y)
            for (int z = 0; z < b; ++z, ++idx)
                if (mask.test(octant_of(x, y, z, b)))
                    cands.push_back({prob_block.data[idx], idx});

    size_t take = std::min<size_t>(k, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + take, cands.end(),
                      [](const Cand& a, const Cand& b) {
                          return a.prob > b.prob || (a.prob == b.prob && a.idx < b.idx);
                      });

    VoxelBlock out;
    out.origin = prob_block.origin;
    out.size = b;
    out.channels = prob_block.channels;
    out.n_input = prob_block.n_input;
    out.data.assign(size_t(prob_block.channels) * prob_block.voxels(), 0.0f);
    for (size_t i = 0; i < take; ++i) {
        size_t v = cands[i].idx;
        out.data[v] = 1.0f;
        for (int c = 1; c < prob_block.channels; ++c)
            out.data[size_t(c) * prob_block.voxels() + v] =
                prob_block.data[size_t(c) * prob_block.voxels() + v];
    }
    return out;
}

namespace {

int block_precision(int size) {
    int p = 1;
    while ((1 << p) < size) ++p;
    return p;
}

}  // namespace

double block_quality(const VoxelBlock& source, const VoxelBlock& binary,
                     const TopKSearchConfig& cfg) {
    std::vector<Vec3i> sp, bp;
    std::vector<Rgb> sc, bc;
    block_points(source, sp, source.channels == 4 ? &sc : nullptr);
    block_points(binary, bp, binary.channels == 4 ? &bc : nullptr);
    if (sp.empty()) throw std::invalid_argument("block_quality: empty source block");

    PointCloud ref = make_cloud(std::move(sp), std::move(sc));
    PointCloud test = make_cloud(std::move(bp), std::move(bc));
    int p = block_precision(source.size);

    bool d2 = cfg.metric == TopKMetric::d2 || cfg.metric == TopKMetric::d2yuv ||
              cfg.metric == TopKMetric::d2rgb;
    double geo = d2 ? psnr_d2(ref, test, p) : psnr_d1(ref, test, p);

    bool wants_color = cfg.metric != TopKMetric::d1 && cfg.metric != TopKMetric::d2;
    if (!wants_color || !ref.has_colors() || !test.has_colors()) return geo;

    ColorPsnr cp = psnr_color(ref, test);
    bool rgb = cfg.metric == TopKMetric::d1rgb || cfg.metric == TopKMetric::d2rgb;
    double col = rgb ? cp.rgb : cp.yuv;
    return (1.0 - cfg.color_weight) * geo + cfg.color_weight * col;
}

namespace {

// One left-to-right pass over a beta grid with patience-based early
// stopping. Qualities are cached per k since many betas collapse to
// the same count.
struct BetaSearch {
    const VoxelBlock& source;
    const VoxelBlock& prob;
    const TopKSearchConfig& cfg;
    uint32_t n_input;
    OctantMask mask;
    std::map<uint32_t, double> cache;
    BetaResult best;
    bool any = false;

    double eval(uint32_t k) {
        auto it = cache.find(k);
        if (it != cache.end()) return it->second;
        double q = block_quality(source, top_k(prob, k, mask), cfg);
        cache.emplace(k, q);
        return q;
    }

    void pass(const std::vector<double>& grid) {
        int stale = 0;
        for (double beta : grid) {
            uint32_t k = topk_count(n_input, beta);
            double q = eval(k);
            if (!any || q > best.quality) {
                best = {beta, k, q};
                any = true;
                stale = 0;
            } else if (++stale >= cfg.patience) {
                break;
            }
        }
    }
};

}  // namespace

namespace {

BetaResult optimize_beta_masked(const VoxelBlock& source,
                                const VoxelBlock& prob_block,
                                const TopKSearchConfig& cfg, OctantMask mask) {
    uint32_t n_input = 0;
    for (size_t i = 0; i < source.voxels(); ++i)
        if (source.data[i] != 0.0f) ++n_input;
    if (n_input == 0) throw std::invalid_argument("optimize_beta: empty source block");

    BetaSearch search{source, prob_block, cfg, n_input, mask, {}, {}};

    if (!cfg.fast) {
        std::vector<double> grid;
        for (int j = 1; j <= 20 * cfg.max_topk; ++j) grid.push_back(0.05 * j);
        search.pass(grid);
    } else {
        std::vector<double> coarse;
        for (int j = 1; j <= 2 * cfg.max_topk; ++j) coarse.push_back(0.5 * j);
        search.pass(coarse);
        double center = search.best.beta;
        std::vector<double> fine;
        for (int j = -10; j <= 10; ++j) {
            double beta = center + 0.05 * j;
            if (beta > 1e-9 && beta <= cfg.max_topk + 1e-9) fine.push_back(beta);
        }
        search.pass(fine);
    }
    return search.best;
}

}  // namespace

BetaResult optimize_beta(const VoxelBlock& source, const VoxelBlock& prob_block,
                         const TopKSearchConfig& cfg) {
    return optimize_beta_masked(source, prob_block, cfg, octant_occupancy(source));
}

VoxelBlock binarize_abu(const VoxelBlock& original, const VoxelBlock& abu_prob,
                        AbuTopKMode mode, double beta_codec, OctantMask mask,
                        const TopKSearchConfig& cfg, BinarizationParams* params) {
    if (mode == AbuTopKMode::none) {
        uint32_t n_input = 0;
        for (size_t i = 0; i < original.voxels(); ++i)
            if (original.data[i] != 0.0f) ++n_input;
        if (n_input == 0)
            throw std::invalid_argument("binarize_abu: empty original block");
        uint32_t k = topk_count(n_input, beta_codec);
        if (params) {
            params->k_abu = k;
            params->beta = beta_codec;
            params->mask = mask;
        }
        return top_k(abu_prob, k, mask);
    }
    TopKSearchConfig local = cfg;
    local.fast = (mode == AbuTopKMode::fast);
    BetaResult r = optimize_beta_masked(original, abu_prob, local, mask);
    if (params) {
        params->k_abu = r.k;
        params->beta = r.beta;
        params->mask = mask;
    }
    return top_k(abu_prob, r.k, mask);
}

}  // namespace itpcc
