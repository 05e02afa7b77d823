#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace itpcc {

using Vec3i = std::array<int32_t, 3>;
using Rgb = std::array<uint8_t, 3>;

// Voxelized point cloud: integer coordinates, optional 8-bit RGB,
// coordinates in [0, 2^precision). Points are kept sorted
// lexicographically and duplicate-free.
struct PointCloud {
    std::vector<Vec3i> points;
    std::vector<Rgb> colors;  // empty, or same length as points
    int precision = 0;

    bool has_colors() const { return !colors.empty(); }
    size_t size() const { return points.size(); }
};

// Builds a canonical cloud from raw (possibly duplicated, unsorted)
// voxels. Duplicates are merged; the merged colour is the channel-wise
// arithmetic mean, rounded half away from zero. precision becomes the
// smallest p with all coordinates < 2^p.
PointCloud make_cloud(std::vector<Vec3i> points, std::vector<Rgb> colors = {});

// Dense B^3 occupancy block, 1 channel (geometry) or 4 (geometry+RGB
// scaled to [0,1]). Layout: ((c*B + x)*B + y)*B + z.
struct VoxelBlock {
    Vec3i origin{0, 0, 0};  // block-grid index * size
    int size = 0;
    int channels = 1;
    std::vector<float> data;
    uint32_t n_input = 0;  // filled voxels of the source block

    float& at(int c, int x, int y, int z) {
        return data[((size_t(c) * size + x) * size + y) * size + z];
    }
    float at(int c, int x, int y, int z) const {
        return data[((size_t(c) * size + x) * size + y) * size + z];
    }
    size_t voxels() const { return size_t(size) * size * size; }
};

// 8-bit octant occupancy: bit i set iff octant i of the source block
// contains at least one filled voxel. Octant index packs the three
// half-space tests as (x_hi<<2)|(y_hi<<1)|z_hi.
struct OctantMask {
    uint8_t bits = 0;

    bool test(int octant) const { return (bits >> octant) & 1; }
    void set(int octant) { bits |= uint8_t(1u << octant); }
};

int octant_of(int x, int y, int z, int block_size);

OctantMask octant_occupancy(const VoxelBlock& block);

// Disjoint partition into B^3 blocks; empty blocks are omitted.
// Output is ordered lexicographically by origin.
std::vector<VoxelBlock> partition(const PointCloud& pc, int block_size,
                                  bool with_color = false);

// Inverse of partition: geometry channel must be binary.
// Throws std::invalid_argument on overlapping origins.
PointCloud merge(const std::vector<VoxelBlock>& blocks);

// Extracts points (and colours, if 4-channel) from a binary block.
void block_points(const VoxelBlock& block, std::vector<Vec3i>& points,
                  std::vector<Rgb>* colors);

// Mean distance to the k nearest neighbours, averaged over the cloud.
double sparsity(const PointCloud& pc, int k = 20);

}  // namespace itpcc
