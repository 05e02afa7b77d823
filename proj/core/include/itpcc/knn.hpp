#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <unordered_map>
#include <vector>

#include "itpcc/pointcloud.hpp"

namespace itpcc {

// Exact nearest-neighbour search over integer points via uniform grid
// hashing. Cells are scanned in expanding Chebyshev rings with a
// conservative distance bound, so results match brute force exactly.
class GridIndex {
public:
    explicit GridIndex(const std::vector<Vec3i>& points, int cell = 8)
        : points_(points), cell_(cell) {
        cells_.reserve(points.size() / 4 + 1);
        for (size_t i = 0; i < points.size(); ++i) {
            Vec3i c = cell_of(points[i]);
            for (int a = 0; a < 3; ++a) {
                cmin_[a] = std::min(cmin_[a], c[a]);
                cmax_[a] = std::max(cmax_[a], c[a]);
            }
            cells_[key(c)].push_back(int(i));
        }
    }

    struct Hit {
        double dist2;
        int index;
    };

    // Nearest neighbour of q; `skip` excludes one index (self queries).
    Hit nearest(const Vec3i& q, int skip = -1) const {
        auto hits = knearest(q, 1, skip);
        return hits.empty() ? Hit{-1.0, -1} : hits[0];
    }

    // k nearest neighbours, ascending by distance; ties by index.
    std::vector<Hit> knearest(const Vec3i& q, int k, int skip = -1) const {
        auto cmp = [](const Hit& a, const Hit& b) {
            return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
        };
        int kk = std::min<int>(k, int(points_.size()) - (skip >= 0 ? 1 : 0));
        if (kk <= 0) return {};
        std::priority_queue<Hit, std::vector<Hit>, decltype(cmp)> heap(cmp);
        Vec3i qc = cell_of(q);
        int max_ring = 0;
        for (int a = 0; a < 3; ++a)
            max_ring = std::max({max_ring, std::abs(qc[a] - cmin_[a]),
                                 std::abs(qc[a] - cmax_[a])});
        for (int ring = 0; ring <= max_ring; ++ring) {
            // Any point in ring `ring` is at least (ring-1)*cell away.
            double dmin = double(ring - 1) * cell_;
            if (int(heap.size()) == kk && dmin > 0 && heap.top().dist2 <= dmin * dmin)
                break;
            scan_ring(q, qc, ring, kk, skip, heap, cmp);
        }
        std::vector<Hit> out;
        out.resize(heap.size());
        for (size_t i = out.size(); i-- > 0;) {
            out[i] = heap.top();
            heap.pop();
        }
        return out;
    }

    size_t size() const { return points_.size(); }
    const Vec3i& point(int i) const { return points_[i]; }

private:
    Vec3i cell_of(const Vec3i& p) const {
        auto d = [this](int v) { return v >= 0 ? v / cell_ : (v - cell_ + 1) / cell_; };
        return {d(p[0]), d(p[1]), d(p[2])};
    }
    static uint64_t key(const Vec3i& c) {
        auto u = [](int v) { return uint64_t(uint32_t(v + (1 << 20))) & 0x1FFFFF; };
        return (u(c[0]) << 42) | (u(c[1]) << 21) | u(c[2]);
    }
    template <class Heap, class Cmp>
    bool scan_ring(const Vec3i& q, const Vec3i& qc, int ring, int k, int skip,
                   Heap& heap, const Cmp& cmp) const {
        bool any = false;
        auto visit = [&](int cx, int cy, int cz) {
            auto it = cells_.find(key({cx, cy, cz}));
            if (it == cells_.end()) return;
            any = true;
            for (int idx : it->second) {
                if (idx == skip) continue;
                const Vec3i& p = points_[idx];
                double dx = double(p[0]) - q[0];
                double dy = double(p[1]) - q[1];
                double dz = double(p[2]) - q[2];
                Hit h{dx * dx + dy * dy + dz * dz, idx};
                if (int(heap.size()) < k)
                    heap.push(h);
                else if (cmp(h, heap.top())) {
                    heap.pop();
                    heap.push(h);
                }
            }
        };
        if (ring == 0) {
            visit(qc[0], qc[1], qc[2]);
            return any;
        }
        for (int dx = -ring; dx <= ring; ++dx)
            for (int dy = -ring; dy <= ring; ++dy)
                for (int dz = -ring; dz <= ring; ++dz) {
                    if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring)
                        continue;
                    visit(qc[0] + dx, qc[1] + dy, qc[2] + dz);
                }
        return any;
    }

    const std::vector<Vec3i>& points_;
    int cell_;
    Vec3i cmin_{1 << 20, 1 << 20, 1 << 20};
    Vec3i cmax_{-(1 << 20), -(1 << 20), -(1 << 20)};
    std::unordered_map<uint64_t, std::vector<int>> cells_;
};

}  // namespace itpcc
