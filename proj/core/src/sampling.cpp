#include "itpcc/sampling.hpp"

#include <cmath>
#include <stdexcept>

namespace itpcc {

int32_t round_half_away(double v) {
    return int32_t(v < 0 ? std::ceil(v - 0.5) : std::floor(v + 0.5));
}

PointCloud downsample(const PointCloud& pc, double sf) {
    if (sf < 1.0) throw std::invalid_argument("downsample: sf must be >= 1");
    std::vector<Vec3i> points;
    points.reserve(pc.points.size());
    for (const auto& p : pc.points)
        points.push_back({round_half_away(p[0] / sf), round_half_away(p[1] / sf),
                          round_half_away(p[2] / sf)});
    return make_cloud(std::move(points), pc.colors);
}

PointCloud upsample_basic(const PointCloud& pc, double sf) {
    if (sf < 1.0) throw std::invalid_argument("upsample_basic: sf must be >= 1");
    std::vector<Vec3i> points;
    points.reserve(pc.points.size());
    for (const auto& p : pc.points)
        points.push_back({round_half_away(p[0] * sf), round_half_away(p[1] * sf),
                          round_half_away(p[2] * sf)});
    return make_cloud(std::move(points), pc.colors);
}

}  // namespace itpcc
