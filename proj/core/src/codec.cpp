#include "itpcc/codec.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "itpcc/entropy.hpp"
#include "itpcc/quality.hpp"
#include "itpcc/sampling.hpp"

namespace itpcc {

namespace {

// Symbol tables for the hyper-latents: one per element, indexed by the
// per-channel factorized prior. Encoder and decoder must build these
// identically, so everything is derived from the model and block size.
std::vector<SymbolModel> side_models(const CodingModel<float>& model, int spatial) {
    Tensor<float> loc, scale;
    model.prior(loc, scale);
    int cz = model.arch().hyper_channels();
    size_t per_c = size_t(spatial) * spatial * spatial;
    std::vector<SymbolModel> out;
    out.reserve(size_t(cz) * per_c);
    for (int c = 0; c < cz; ++c) {
        SymbolModel m = build_factorized(loc.data[size_t(c)], scale.data[size_t(c)]);
        for (size_t i = 0; i < per_c; ++i) out.push_back(m);
    }
    return out;
}

std::vector<SymbolModel> main_models(const Tensor<float>& mu,
                                     const Tensor<float>& sigma, double qs) {
    std::vector<SymbolModel> out;
    out.reserve(mu.data.size());
    for (size_t i = 0; i < mu.data.size(); ++i)
        out.push_back(build_symbol_model(mu.data[i] / qs, sigma.data[i] / qs));
    return out;
}

std::vector<int32_t> to_symbols(const Tensor<float>& q) {
    std::vector<int32_t> s(q.data.size());
    for (size_t i = 0; i < s.size(); ++i) s[i] = int32_t(std::lround(q.data[i]));
    return s;
}

// Decoder-side reconstruction of one block's probability volume from
// its coded payloads. The encoder runs the very same function on the
// record it just built, so the top-k simulation is exact by
// construction.
VoxelBlock decode_probabilities(CodingModel<float>& model, const BlockRecord& rec,
                                const StreamHeader& h) {
    int b = h.blk_size;
    int sy = b / 8, sz = (sy + 1) / 2;
    int cy = model.arch().latent_channels();
    int cz = model.arch().hyper_channels();

    auto ssyms = range_decode(rec.side, side_models(model, sz));
    Tensor<float> zhat({1, cz, sz, sz, sz});
    for (size_t i = 0; i < ssyms.size(); ++i) zhat.data[i] = float(ssyms[i]);

    Tensor<float> mu, sigma;
    model.mu_sigma(model.hyper_synthesis_raw(zhat, sy), mu, sigma);

    auto msyms = range_decode(rec.main, main_models(mu, sigma, h.qs));
    Tensor<float> qy({1, cy, sy, sy, sy});
    for (size_t i = 0; i < msyms.size(); ++i) qy.data[i] = float(msyms[i]);

    Tensor<float> dec = model.synthesis(dequantize(qy, double(h.qs)));
    Vec3i origin{int32_t(rec.pos[0]) * b, int32_t(rec.pos[1]) * b,
                 int32_t(rec.pos[2]) * b};
    return tensor_to_block(dec, origin, 0);
}

}  // namespace

VoxelBlock extract_block(const PointCloud& pc, Vec3i origin, int size,
                         bool with_color) {
    VoxelBlock blk;
    blk.origin = origin;
    blk.size = size;
    blk.channels = with_color ? 4 : 1;
    blk.data.assign(size_t(blk.channels) * blk.voxels(), 0.0f);
    for (size_t i = 0; i < pc.points.size(); ++i) {
        const Vec3i& p = pc.points[i];
        int x = p[0] - origin[0], y = p[1] - origin[1], z = p[2] - origin[2];
        if (x < 0 || x >= size || y < 0 || y >= size || z < 0 || z >= size) continue;
        blk.at(0, x, y, z) = 1.0f;
        ++blk.n_input;
        if (with_color && pc.has_colors())
            for (int c = 0; c < 3; ++c)
                blk.at(1 + c, x, y, z) = float(pc.colors[i][c]) / 255.0f;
    }
    return blk;
}

namespace {

int integer_sf(double sf) {
    int isf = int(std::lround(sf));
    if (isf < 2 || std::abs(sf - double(isf)) > 1e-9)
        throw std::invalid_argument(
            "codec: the up-sampling model needs an integer sampling factor >= 2");
    return isf;
}

void check_abu(const AbuModel<float>* abu, const StreamHeader& h) {
    if (!abu)
        throw std::invalid_argument("codec: stream uses an up-sampling model "
                                    "but none was provided");
    int want = h.with_color ? 4 : 1;
    if (abu->arch().in_channels != want)
        throw std::invalid_argument("codec: up-sampling model channel mismatch");
    int isf = integer_sf(double(h.sf));
    int up_size = h.blk_size * isf;
    if (up_size % abu->arch().stride() != 0)
        throw std::invalid_argument(
            "codec: up-sampled block size incompatible with the model stride");
}

// ABU stage for one block: probability volume at the original frame
// from the basic-up-sampled reconstruction.
VoxelBlock abu_probabilities(AbuModel<float>& abu, const PointCloud& upsampled,
                             Vec3i coded_origin, int blk_size, int isf,
                             bool with_color) {
    Vec3i origin{coded_origin[0] * isf, coded_origin[1] * isf,
                 coded_origin[2] * isf};
    int size = blk_size * isf;
    VoxelBlock in = extract_block(upsampled, origin, size, with_color);
    Tensor<float> prob = abu.forward(block_to_tensor<float>(in));
    return tensor_to_block(prob, origin, in.n_input);
}

double cloud_quality(const PointCloud& ref, const PointCloud& test,
                     const TopKSearchConfig& cfg) {
    bool d2 = cfg.metric == TopKMetric::d2 || cfg.metric == TopKMetric::d2yuv ||
              cfg.metric == TopKMetric::d2rgb;
    double geo = d2 ? psnr_d2(ref, test, ref.precision)
                    : psnr_d1(ref, test, ref.precision);
    bool wants_color = cfg.metric != TopKMetric::d1 && cfg.metric != TopKMetric::d2;
    if (!wants_color || !ref.has_colors() || !test.has_colors()) return geo;
    ColorPsnr cp = psnr_color(ref, test);
    bool rgb = cfg.metric == TopKMetric::d1rgb || cfg.metric == TopKMetric::d2rgb;
    return (1.0 - cfg.color_weight) * geo + cfg.color_weight * (rgb ? cp.rgb : cp.yuv);
}

}  // namespace

double auto_scale(const PointCloud& pc) {
    double s = sparsity(pc);
    if (s <= 1.8) return 1.0;
    if (s <= 4.0) return 2.0;
    return 4.0;
}

Bitstream encode(const PointCloud& pc, CodingModel<float>& model,
                 AbuModel<float>* abu, const EncoderConfig& cfg) {
    if (pc.size() == 0) throw std::invalid_argument("encode: empty cloud");
    if (cfg.qs <= 0.0) throw std::invalid_argument("encode: qs must be positive");
    if (cfg.blk_size % CodecArch::kStride != 0)
        throw std::invalid_argument("encode: block size must be a multiple of 8");
    if (cfg.with_color && !pc.has_colors())
        throw std::invalid_argument("encode: cloud has no colours");
    int want_ch = cfg.with_color ? 4 : 1;
    if (model.arch().in_channels != want_ch)
        throw std::invalid_argument("encode: model channel mismatch");

    Bitstream bs;
    bs.header.with_color = cfg.with_color;
    bs.header.with_abu = cfg.use_abu;
    bs.header.precision = pc.precision;
    bs.header.blk_size = cfg.blk_size;
    bs.header.sf = float(cfg.sf ? *cfg.sf : auto_scale(pc));
    bs.header.qs = float(cfg.qs);
    bs.header.model_id = 0;

    double sf = double(bs.header.sf);
    if (sf < 1.0) throw std::invalid_argument("encode: sf must be >= 1");
    if (cfg.use_abu) check_abu(abu, bs.header);

    PointCloud coded = sf > 1.0 ? downsample(pc, sf) : pc;
    std::vector<VoxelBlock> blocks = partition(coded, cfg.blk_size, cfg.with_color);

    std::vector<VoxelBlock> binaries;
    std::vector<double> betas;
    binaries.reserve(blocks.size());
    for (const VoxelBlock& blk : blocks) {
        BlockRecord rec;
        for (int i = 0; i < 3; ++i)
            rec.pos[i] = uint16_t(blk.origin[i] / cfg.blk_size);
        rec.mask = octant_occupancy(blk).bits;

        Tensor<float> x = block_to_tensor<float>(blk);
        Tensor<float> y = model.analysis(x);
        Tensor<float> qy = quantize(y, cfg.qs);
        Tensor<float> qz = quantize(model.hyper_analysis(y), 1.0);

        int sy = blk.size / 8;
        rec.side = range_encode(to_symbols(qz), side_models(model, (sy + 1) / 2));
        Tensor<float> mu, sigma;
        model.mu_sigma(model.hyper_synthesis_raw(qz, sy), mu, sigma);
        rec.main = range_encode(to_symbols(qy), main_models(mu, sigma, cfg.qs));

        // decoder-side simulation picks the point budget
        VoxelBlock prob = decode_probabilities(model, rec, bs.header);
        prob.n_input = blk.n_input;
        BetaResult r = optimize_beta(blk, prob, cfg.topk);
        rec.k_codec = r.k;
        betas.push_back(r.beta);
        binaries.push_back(top_k(prob, r.k, OctantMask{rec.mask}));
        bs.blocks.push_back(std::move(rec));
    }

    if (cfg.use_abu) {
        int isf = integer_sf(sf);
        PointCloud up = upsample_basic(merge(binaries), sf);
        TopKSearchConfig abu_cfg = cfg.topk;
        abu_cfg.max_topk = cfg.abu_max_topk;
        for (size_t i = 0; i < bs.blocks.size(); ++i) {
            BlockRecord& rec = bs.blocks[i];
            Vec3i coded_origin = binaries[i].origin;
            VoxelBlock prob = abu_probabilities(*abu, up, coded_origin,
                                                cfg.blk_size, isf, cfg.with_color);
            Vec3i orig{coded_origin[0] * isf, coded_origin[1] * isf,
                       coded_origin[2] * isf};
            VoxelBlock target =
                extract_block(pc, orig, cfg.blk_size * isf, cfg.with_color);
            if (target.n_input == 0) {
                // rounding during down-sampling can (rarely) leave a coded
                // block whose original region is empty; keep the coded budget
                rec.k_abu = rec.k_codec;
                continue;
            }
            BinarizationParams bp;
            binarize_abu(target, prob, cfg.abu_mode, betas[i],
                         OctantMask{rec.mask}, abu_cfg, &bp);
            rec.k_abu = bp.k_abu;
        }
    }
    return bs;
}

namespace {

PointCloud decode_records(const Bitstream& bs, CodingModel<float>& model,
                          AbuModel<float>* abu,
                          const std::vector<const BlockRecord*>& records) {
    const StreamHeader& h = bs.header;
    int want_ch = h.with_color ? 4 : 1;
    if (model.arch().in_channels != want_ch)
        throw std::invalid_argument("decode: model channel mismatch");
    if (h.with_abu) check_abu(abu, h);

    std::vector<VoxelBlock> binaries;
    binaries.reserve(records.size());
    for (const BlockRecord* rec : records) {
        VoxelBlock prob = decode_probabilities(model, *rec, h);
        binaries.push_back(top_k(prob, rec->k_codec, OctantMask{rec->mask}));
    }
    PointCloud coded = merge(binaries);
    double sf = double(h.sf);

    PointCloud out;
    if (!h.with_abu) {
        out = sf > 1.0 ? upsample_basic(coded, sf) : std::move(coded);
    } else {
        int isf = integer_sf(sf);
        PointCloud up = upsample_basic(coded, sf);
        std::vector<VoxelBlock> finals;
        finals.reserve(records.size());
        for (size_t i = 0; i < records.size(); ++i) {
            const BlockRecord* rec = records[i];
            VoxelBlock prob =
                abu_probabilities(*abu, up, binaries[i].origin, h.blk_size, isf,
                                  h.with_color);
            finals.push_back(top_k(prob, rec->k_abu, OctantMask{rec->mask}));
        }
        out = merge(finals);
    }
    out.precision = h.precision;
    return out;
}

}  // namespace

PointCloud decode(const Bitstream& bs, CodingModel<float>& model,
                  AbuModel<float>* abu) {
    std::vector<const BlockRecord*> records;
    records.reserve(bs.blocks.size());
    for (const auto& rec : bs.blocks) records.push_back(&rec);
    return decode_records(bs, model, abu, records);
}

PointCloud decode_blocks(const Bitstream& bs, CodingModel<float>& model,
                         AbuModel<float>* abu, const std::vector<size_t>& indices) {
    std::vector<const BlockRecord*> records;
    records.reserve(indices.size());
    for (size_t i : indices) {
        if (i >= bs.blocks.size())
            throw std::out_of_range("decode_blocks: record index out of range");
        records.push_back(&bs.blocks[i]);
    }
    return decode_records(bs, model, abu, records);
}

std::vector<SweepPoint> rd_sweep(const PointCloud& pc, CodingModel<float>& model,
                                 AbuModel<float>* abu, EncoderConfig base,
                                 const std::vector<double>& sf_grid,
                                 const std::vector<double>& qs_grid) {
    std::vector<SweepPoint> points;
    for (double sf : sf_grid)
        for (double qs : qs_grid) {
            EncoderConfig cfg = base;
            cfg.sf = sf;
            cfg.qs = qs;
            if (cfg.use_abu && sf < 2.0) cfg.use_abu = false;
            Bitstream bs = encode(pc, model, abu, cfg);
            size_t bytes = serialize(bs).size();
            PointCloud dec = decode(bs, model, cfg.use_abu ? abu : nullptr);
            SweepPoint pt;
            pt.sf = sf;
            pt.qs = qs;
            pt.bytes = bytes;
            pt.bpp = bpp(bytes, pc.size());
            pt.quality = cloud_quality(pc, dec, base.topk);
            points.push_back(pt);
        }
    mark_hull(points);
    return points;
}

void mark_hull(std::vector<SweepPoint>& points) {
    for (auto& p : points) p.on_hull = false;
    // upper-left convex hull in (bpp, quality); infinities are kept
    // orderable by a finite stand-in
    auto q = [](const SweepPoint& p) {
        return std::isinf(p.quality) ? 1e4 : p.quality;
    };
    std::vector<size_t> order(points.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (points[a].bpp != points[b].bpp) return points[a].bpp < points[b].bpp;
        return q(points[a]) > q(points[b]);
    });
    std::vector<size_t> hull;
    for (size_t i : order) {
        // same rate as the chain head (sorted quality-desc) or no
        // quality gain over a cheaper point: dominated
        if (!hull.empty() && (points[hull.back()].bpp == points[i].bpp ||
                              q(points[i]) <= q(points[hull.back()])))
            continue;
        while (hull.size() >= 2) {
            const SweepPoint& a = points[hull[hull.size() - 2]];
            const SweepPoint& b = points[hull.back()];
            double cross = (b.bpp - a.bpp) * (q(points[i]) - q(a)) -
                           (points[i].bpp - a.bpp) * (q(b) - q(a));
            if (cross >= 0.0) hull.pop_back();  // b on/under the a-i chord
            else break;
        }
        hull.push_back(i);
    }
    for (size_t i : hull) points[i].on_hull = true;
}

std::optional<SweepPoint> pick_rate_point(const std::vector<SweepPoint>& points,
                                          double target_bpp) {
    std::optional<SweepPoint> best;
    for (const auto& p : points) {
        if (!p.on_hull) continue;
        if (std::abs(p.bpp - target_bpp) > 0.10 * target_bpp) continue;
        if (!best || std::abs(p.bpp - target_bpp) < std::abs(best->bpp - target_bpp))
            best = p;
    }
    return best;
}

}  // namespace itpcc
