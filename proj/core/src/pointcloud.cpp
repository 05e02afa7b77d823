#include "itpcc/pointcloud.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "itpcc/knn.hpp"

namespace itpcc {

namespace {

int precision_for(const std::vector<Vec3i>& points) {
    int32_t mx = 0;
    for (const auto& p : points) mx = std::max({mx, p[0], p[1], p[2]});
    int p = 0;
    while ((int64_t(1) << p) <= mx) ++p;
    return p;
}

uint8_t round_mean(int64_t sum, int64_t count) {
    // arithmetic mean, round half away from zero (values are >= 0)
    return uint8_t((2 * sum + count) / (2 * count));
}

}  // namespace

PointCloud make_cloud(std::vector<Vec3i> points, std::vector<Rgb> colors) {
    if (!colors.empty() && colors.size() != points.size())
        throw std::invalid_argument("make_cloud: colour/point count mismatch");
    for (const auto& p : points)
        if (p[0] < 0 || p[1] < 0 || p[2] < 0)
            throw std::invalid_argument("make_cloud: negative coordinate");

    std::vector<size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return points[a] < points[b]; });

    PointCloud pc;
    pc.points.reserve(points.size());
    if (!colors.empty()) pc.colors.reserve(points.size());
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        std::array<int64_t, 3> sum{0, 0, 0};
        while (j < order.size() && points[order[j]] == points[order[i]]) {
            if (!colors.empty())
                for (int c = 0; c < 3; ++c) sum[c] += colors[order[j]][c];
            ++j;
        }
        pc.points.push_back(points[order[i]]);
        if (!colors.empty()) {
            int64_t n = int64_t(j - i);
            pc.colors.push_back(
                {round_mean(sum[0], n), round_mean(sum[1], n), round_mean(sum[2], n)});
        }
        i = j;
    }
    pc.precision = precision_for(pc.points);
    return pc;
}

int octant_of(int x, int y, int z, int block_size) {
    int h = block_size / 2;
    return ((x >= h) << 2) | ((y >= h) << 1) | (z >= h);
}

OctantMask octant_occupancy(const VoxelBlock& block) {
    OctantMask mask;
    int B = block.size;
    for (int x = 0; x < B; ++x)
        for (int y = 0; y < B; ++y)
            for (int z = 0; z < B; ++z)
                if (block.at(0, x, y, z) > 0.5f) mask.set(octant_of(x, y, z, B));
    return mask;
}

std::vector<VoxelBlock> partition(const PointCloud& pc, int block_size,
                                  bool with_color) {
    if (block_size < 1) throw std::invalid_argument("partition: bad block size");
    if (with_color && !pc.has_colors())
        throw std::invalid_argument("partition: cloud has no colours");

    std::map<Vec3i, std::vector<size_t>> groups;
    for (size_t i = 0; i < pc.points.size(); ++i) {
        const Vec3i& p = pc.points[i];
        groups[{p[0] / block_size, p[1] / block_size, p[2] / block_size}].push_back(i);
    }

    std::vector<VoxelBlock> blocks;
    blocks.reserve(groups.size());
    for (const auto& [g, idxs] : groups) {
        VoxelBlock b;
        b.origin = {g[0] * block_size, g[1] * block_size, g[2] * block_size};
        b.size = block_size;
        b.channels = with_color ? 4 : 1;
        b.data.assign(size_t(b.channels) * b.voxels(), 0.0f);
        b.n_input = uint32_t(idxs.size());
        for (size_t i : idxs) {
            int x = pc.points[i][0] - b.origin[0];
            int y = pc.points[i][1] - b.origin[1];
            int z = pc.points[i][2] - b.origin[2];
            b.at(0, x, y, z) = 1.0f;
            if (with_color)
                for (int c = 0; c < 3; ++c)
                    b.at(1 + c, x, y, z) = float(pc.colors[i][c]) / 255.0f;
        }
        blocks.push_back(std::move(b));
    }
    return blocks;
}

void block_points(const VoxelBlock& block, std::vector<Vec3i>& points,
                  std::vector<Rgb>* colors) {
    int B = block.size;
    for (int x = 0; x < B; ++x)
        for (int y = 0; y < B; ++y)
            for (int z = 0; z < B; ++z) {
                float g = block.at(0, x, y, z);
                if (g != 0.0f && g != 1.0f)
                    throw std::invalid_argument("block_points: non-binary geometry");
                if (g != 1.0f) continue;
                points.push_back(
                    {block.origin[0] + x, block.origin[1] + y, block.origin[2] + z});
                if (colors && block.channels == 4) {
                    Rgb rgb;
                    for (int c = 0; c < 3; ++c) {
                        float v = std::clamp(block.at(1 + c, x, y, z), 0.0f, 1.0f);
                        rgb[c] = uint8_t(std::lround(v * 255.0f));
                    }
                    colors->push_back(rgb);
                }
            }
}

PointCloud merge(const std::vector<VoxelBlock>& blocks) {
    std::vector<Vec3i> points;
    std::vector<Rgb> colors;
    std::map<Vec3i, bool> seen;
    bool with_color = !blocks.empty() && blocks.front().channels == 4;
    for (const auto& b : blocks) {
        if (!seen.emplace(b.origin, true).second)
            throw std::invalid_argument("merge: overlapping block origins");
        block_points(b, points, with_color ? &colors : nullptr);
    }
    return make_cloud(std::move(points), std::move(colors));
}

double sparsity(const PointCloud& pc, int k) {
    if (int(pc.points.size()) <= k)
        throw std::invalid_argument("sparsity: too few points");
    GridIndex index(pc.points);
    double total = 0.0;
    for (size_t i = 0; i < pc.points.size(); ++i) {
        auto hits = index.knearest(pc.points[i], k, int(i));
        double s = 0.0;
        for (const auto& h : hits) s += std::sqrt(h.dist2);
        total += s / k;
    }
    return total / double(pc.points.size());
}

}  // namespace itpcc
