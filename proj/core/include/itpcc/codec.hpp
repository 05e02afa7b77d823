#pragma once

#include <optional>
#include <vector>

#include "itpcc/abu.hpp"
#include "itpcc/binarization.hpp"
#include "itpcc/bitstream.hpp"
#include "itpcc/coding_model.hpp"
#include "itpcc/pointcloud.hpp"

namespace itpcc {

struct EncoderConfig {
    int blk_size = 128;
    double qs = 1.0;
    std::optional<double> sf;  // empty = pick from point density
    bool with_color = false;
    TopKSearchConfig topk;
    bool use_abu = false;
    AbuTopKMode abu_mode = AbuTopKMode::full;
    int abu_max_topk = 10;
};

// Sampling factor from average point spacing: dense clouds are coded
// as-is, sparse ones are down-sampled so the occupancy blocks stay
// informative.
double auto_scale(const PointCloud& pc);

// Occupancy (and colours) of the cloud's points falling inside the
// cube [origin, origin + size).
VoxelBlock extract_block(const PointCloud& pc, Vec3i origin, int size,
                         bool with_color);

// Full encoder pipeline: optional down-sampling, block partition,
// learned transform + quantization + range coding per block, and the
// decoder-side top-k simulation that picks each block's point budget.
// `abu` (matching cfg.use_abu) adds the super-resolution stage; it
// requires an integer sampling factor >= 2.
Bitstream encode(const PointCloud& pc, CodingModel<float>& model,
                 AbuModel<float>* abu, const EncoderConfig& cfg);

PointCloud decode(const Bitstream& bs, CodingModel<float>& model,
                  AbuModel<float>* abu);

// Random access: reconstructs only the listed block records. Blocks
// are independent, so the result is bit-identical to the matching
// subset of a full decode.
PointCloud decode_blocks(const Bitstream& bs, CodingModel<float>& model,
                         AbuModel<float>* abu, const std::vector<size_t>& indices);

struct SweepPoint {
    double sf = 1.0;
    double qs = 1.0;
    size_t bytes = 0;
    double bpp = 0.0;
    double quality = 0.0;  // dB, metric per EncoderConfig::topk
    bool on_hull = false;  // upper-left convex hull of (bpp, quality)
};

// Recomputes the on_hull flags over an arbitrary point set (useful
// after concatenating sweeps run with different models).
void mark_hull(std::vector<SweepPoint>& points);

// Encodes/decodes the cloud over a (sf, qs) grid and measures each
// operating point; hull points are the non-dominated rate-quality
// frontier.
std::vector<SweepPoint> rd_sweep(const PointCloud& pc, CodingModel<float>& model,
                                 AbuModel<float>* abu, EncoderConfig base,
                                 const std::vector<double>& sf_grid,
                                 const std::vector<double>& qs_grid);

// Hull point closest to `target_bpp`, if any lands within +-10%.
std::optional<SweepPoint> pick_rate_point(const std::vector<SweepPoint>& points,
                                          double target_bpp);

}  // namespace itpcc
