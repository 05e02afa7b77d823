#pragma once

#include <cstdint>
#include <string>

#include "itpcc/pointcloud.hpp"

namespace itpcc {

// Quality objective for the Top-k search. The *yuv / *rgb variants mix
// the geometry PSNR with a colour PSNR via color_weight.
enum class TopKMetric { d1, d2, d1yuv, d2yuv, d1rgb, d2rgb };

TopKMetric parse_topk_metric(const std::string& name);
std::string to_string(TopKMetric m);

enum class AbuTopKMode { none, full, fast };

AbuTopKMode parse_abu_mode(const std::string& name);
std::string to_string(AbuTopKMode m);

struct TopKSearchConfig {
    TopKMetric metric = TopKMetric::d1yuv;
    double color_weight = 0.5;  // ω in the mixed metrics
    int max_topk = 10;
    int patience = 5;
    bool fast = false;
};

// Per-block values that travel in the bitstream.
struct BinarizationParams {
    uint32_t k_codec = 0;
    uint32_t k_abu = 0;  // 0 = ABU unused
    double beta = 0.0;
    OctantMask mask;
};

// k = round(n_input * beta), half away from zero, floored at 1.
uint32_t topk_count(uint32_t n_input, double beta);

// Marks the k most probable admissible voxels as occupied. Voxels in
// octants with a cleared mask bit are never selected; ties go to the
// lower linear index. A 4-channel prob block passes its colour
// channels through on the selected voxels.
VoxelBlock top_k(const VoxelBlock& prob_block, uint32_t k, OctantMask mask);

// The search objective: metric between the source block and a binary
// candidate, both taken in the block's own coordinate frame. Falls
// back to geometry-only when either block lacks colours.
double block_quality(const VoxelBlock& source, const VoxelBlock& binary,
                     const TopKSearchConfig& cfg);

struct BetaResult {
    double beta = 0.0;
    uint32_t k = 0;
    double quality = 0.0;
};

// Grid search over beta for the best block_quality. Full mode walks
// {0.05*j : j = 1..20*max_topk}; fast mode walks a coarse 0.5 grid and
// refines at 0.05 within +-0.5 of the coarse best. Both stop a pass
// after `patience` consecutive non-improving evaluations.
BetaResult optimize_beta(const VoxelBlock& source, const VoxelBlock& prob_block,
                         const TopKSearchConfig& cfg);

// Binarizes an ABU probability block. Mode none reuses beta_codec;
// full/fast re-run the beta search against `original`, the
// pre-down-sampling source block. `mask` is the octant mask carried in
// the bitstream (shared with the codec's top-k) so the decoder can
// reproduce the selection. Fills params->k_abu and beta.
VoxelBlock binarize_abu(const VoxelBlock& original, const VoxelBlock& abu_prob,
                        AbuTopKMode mode, double beta_codec, OctantMask mask,
                        const TopKSearchConfig& cfg, BinarizationParams* params);

}  // namespace itpcc
