#pragma once

#include <limits>
#include <vector>

#include "itpcc/pointcloud.hpp"

namespace itpcc {

// Identical clouds would give infinite PSNR; reported as this sentinel.
constexpr double kLosslessPsnr = std::numeric_limits<double>::infinity();

// Symmetric point-to-point geometry PSNR, peak 3*(2^precision - 1)^2,
// max of the two directional MSEs.
double psnr_d1(const PointCloud& ref, const PointCloud& test, int precision);

// Point-to-plane variant; reference normals from a PCA plane fit over
// the 12 nearest reference neighbours, D1 fallback on degenerate
// neighbourhoods.
double psnr_d2(const PointCloud& ref, const PointCloud& test, int precision);

struct ColorPsnr {
    double y;
    double u;
    double v;
    double yuv;  // (6*Y + U + V)/8 MSE combination
    double rgb;  // mean-MSE over R,G,B
};

// Colour PSNR via nearest-neighbour correspondence, symmetrized by the
// max of directional MSEs; YUV via BT.709 full range, peak 255.
ColorPsnr psnr_color(const PointCloud& ref, const PointCloud& test);

// Bits per input point.
double bpp(size_t bitstream_bytes, size_t n_input_points);

struct RdPoint {
    double rate;     // bpp
    double quality;  // dB (or comparable scalar)
};
using RdCurve = std::vector<RdPoint>;

struct BdResult {
    double bd_rate_percent;
    double bd_quality;
};

// Classic Bjontegaard deltas of curve_b over curve_a: cubic fit of
// quality vs log10(rate) (and the inverse), integrated over the
// overlapping range. Requires >= 4 points per curve and an overlap.
BdResult bd_metrics(const RdCurve& curve_a, const RdCurve& curve_b);

}  // namespace itpcc
