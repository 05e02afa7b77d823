#pragma once

#include "itpcc/pointcloud.hpp"

namespace itpcc {

// Rounds half away from zero.
int32_t round_half_away(double v);

// Scales coordinates by 1/sf, rounds, merges duplicates (colour mean).
// sf must be >= 1.
PointCloud downsample(const PointCloud& pc, double sf);

// Scales coordinates by sf and rounds; point count is unchanged.
PointCloud upsample_basic(const PointCloud& pc, double sf);

}  // namespace itpcc
