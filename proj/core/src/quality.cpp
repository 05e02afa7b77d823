#include "itpcc/quality.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include "itpcc/knn.hpp"

namespace itpcc {

namespace {

double peak_psnr(double peak_sq, double mse) {
    if (mse <= 0.0) return kLosslessPsnr;
    return 10.0 * std::log10(peak_sq / mse);
}

double geom_peak(int precision) {
    double m = double((int64_t(1) << precision) - 1);
    return 3.0 * m * m;
}

using Vec3d = std::array<double, 3>;

Vec3d sub(const Vec3i& a, const Vec3i& b) {
    return {double(a[0]) - b[0], double(a[1]) - b[1], double(a[2]) - b[2]};
}
double dot(const Vec3d& a, const Vec3d& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

// Smallest eigenvector of a symmetric 3x3 matrix (cyclic Jacobi).
// Returns false when the neighbourhood is rank-deficient for a plane
// fit (second eigenvalue is numerically zero).
bool plane_normal(const std::array<std::array<double, 3>, 3>& cov_in, Vec3d& normal) {
    std::array<std::array<double, 3>, 3> a = cov_in;
    std::array<std::array<double, 3>, 3> v{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    for (int sweep = 0; sweep < 32; ++sweep) {
        double off = std::abs(a[0][1]) + std::abs(a[0][2]) + std::abs(a[1][2]);
        if (off < 1e-15) break;
        for (int p = 0; p < 2; ++p)
            for (int q = p + 1; q < 3; ++q) {
                if (std::abs(a[p][q]) < 1e-18) continue;
                double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int r = 0; r < 3; ++r) {
                    double arp = a[r][p], arq = a[r][q];
                    a[r][p] = c * arp - s * arq;
                    a[r][q] = s * arp + c * arq;
                }
                for (int r = 0; r < 3; ++r) {
                    double apr = a[p][r], aqr = a[q][r];
                    a[p][r] = c * apr - s * aqr;
                    a[q][r] = s * apr + c * aqr;
                    double vrp = v[r][p], vrq = v[r][q];
                    v[r][p] = c * vrp - s * vrq;
                    v[r][q] = s * vrp + c * vrq;
                }
            }
    }
    std::array<double, 3> eig{a[0][0], a[1][1], a[2][2]};
    int lo = 0, mid = 1;
    for (int i = 1; i < 3; ++i)
        if (eig[i] < eig[lo]) lo = i;
    for (int i = 0; i < 3; ++i)
        if (i != lo && (eig[i] < eig[mid] || mid == lo)) mid = i;
    double scale = std::max({std::abs(eig[0]), std::abs(eig[1]), std::abs(eig[2])});
    if (scale <= 0.0 || eig[mid] < 1e-9 * scale) return false;
    normal = {v[0][lo], v[1][lo], v[2][lo]};
    return true;
}

// Per-point reference normals; entries without a valid plane fit are
// flagged for D1 fallback.
void reference_normals(const PointCloud& ref, const GridIndex& index,
                       std::vector<Vec3d>& normals, std::vector<bool>& valid) {
    const int kNeighbours = 12;
    normals.assign(ref.points.size(), {0, 0, 0});
    valid.assign(ref.points.size(), false);
    for (size_t i = 0; i < ref.points.size(); ++i) {
        auto hits = index.knearest(ref.points[i], kNeighbours, int(i));
        if (hits.size() < 3) continue;
        Vec3d mean{0, 0, 0};
        for (const auto& h : hits)
            for (int a = 0; a < 3; ++a) mean[a] += ref.points[h.index][a];
        for (int a = 0; a < 3; ++a) mean[a] /= double(hits.size());
        std::array<std::array<double, 3>, 3> cov{};
        for (const auto& h : hits) {
            Vec3d d{ref.points[h.index][0] - mean[0], ref.points[h.index][1] - mean[1],
                    ref.points[h.index][2] - mean[2]};
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) cov[r][c] += d[r] * d[c];
        }
        Vec3d n;
        if (plane_normal(cov, n)) {
            normals[i] = n;
            valid[i] = true;
        }
    }
}

void require_nonempty(const PointCloud& ref, const PointCloud& test) {
    if (ref.points.empty() || test.points.empty())
        throw std::invalid_argument("psnr: empty cloud");
}

}  // namespace

double psnr_d1(const PointCloud& ref, const PointCloud& test, int precision) {
    require_nonempty(ref, test);
    GridIndex iref(ref.points), itest(test.points);
    double mse_ab = 0, mse_ba = 0;
    for (const auto& p : test.points) mse_ab += iref.nearest(p).dist2;
    mse_ab /= double(test.points.size());
    for (const auto& p : ref.points) mse_ba += itest.nearest(p).dist2;
    mse_ba /= double(ref.points.size());
    return peak_psnr(geom_peak(precision), std::max(mse_ab, mse_ba));
}

double psnr_d2(const PointCloud& ref, const PointCloud& test, int precision) {
    require_nonempty(ref, test);
    GridIndex iref(ref.points), itest(test.points);
    std::vector<Vec3d> normals;
    std::vector<bool> valid;
    reference_normals(ref, iref, normals, valid);

    double mse_tr = 0;  // test -> ref, projected on ref normals
    for (const auto& t : test.points) {
        auto h = iref.nearest(t);
        Vec3d d = sub(t, ref.points[h.index]);
        mse_tr += valid[h.index] ? dot(d, normals[h.index]) * dot(d, normals[h.index])
                                 : h.dist2;
    }
    mse_tr /= double(test.points.size());

    double mse_rt = 0;  // ref -> test, projected on each ref point's own normal
    for (size_t i = 0; i < ref.points.size(); ++i) {
        auto h = itest.nearest(ref.points[i]);
        Vec3d d = sub(ref.points[i], test.points[h.index]);
        mse_rt += valid[i] ? dot(d, normals[i]) * dot(d, normals[i]) : h.dist2;
    }
    mse_rt /= double(ref.points.size());

    return peak_psnr(geom_peak(precision), std::max(mse_tr, mse_rt));
}

ColorPsnr psnr_color(const PointCloud& ref, const PointCloud& test) {
    require_nonempty(ref, test);
    if (!ref.has_colors() || !test.has_colors())
        throw std::invalid_argument("psnr_color: missing colours");
    GridIndex iref(ref.points), itest(test.points);

    // BT.709 full range; U/V offsets cancel in the MSE
    auto to_yuv = [](const Rgb& c) -> Vec3d {
        double r = c[0], g = c[1], b = c[2];
        double y = 0.2126 * r + 0.7152 * g + 0.0722 * b;
        return {y, (b - y) / 1.8556, (r - y) / 1.5748};
    };

    auto dir_mse = [&](const PointCloud& a, const PointCloud& b, const GridIndex& ib,
                       Vec3d& yuv, Vec3d& rgb) {
        yuv = {0, 0, 0};
        rgb = {0, 0, 0};
        for (size_t i = 0; i < a.points.size(); ++i) {
            auto h = ib.nearest(a.points[i]);
            Vec3d ya = to_yuv(a.colors[i]), yb = to_yuv(b.colors[h.index]);
            for (int c = 0; c < 3; ++c) {
                double dy = ya[c] - yb[c];
                yuv[c] += dy * dy;
                double dr = double(a.colors[i][c]) - b.colors[h.index][c];
                rgb[c] += dr * dr;
            }
        }
        for (int c = 0; c < 3; ++c) {
            yuv[c] /= double(a.points.size());
            rgb[c] /= double(a.points.size());
        }
    };

    Vec3d yuv_tr, rgb_tr, yuv_rt, rgb_rt;
    dir_mse(test, ref, iref, yuv_tr, rgb_tr);
    dir_mse(ref, test, itest, yuv_rt, rgb_rt);
    Vec3d yuv, rgb;
    for (int c = 0; c < 3; ++c) {
        yuv[c] = std::max(yuv_tr[c], yuv_rt[c]);
        rgb[c] = std::max(rgb_tr[c], rgb_rt[c]);
    }

    double peak = 255.0 * 255.0;
    ColorPsnr out;
    out.y = peak_psnr(peak, yuv[0]);
    out.u = peak_psnr(peak, yuv[1]);
    out.v = peak_psnr(peak, yuv[2]);
    out.yuv = peak_psnr(peak, (6.0 * yuv[0] + yuv[1] + yuv[2]) / 8.0);
    out.rgb = peak_psnr(peak, (rgb[0] + rgb[1] + rgb[2]) / 3.0);
    return out;
}

double bpp(size_t bitstream_bytes, size_t n_input_points) {
    if (n_input_points == 0) throw std::invalid_argument("bpp: no input points");
    return 8.0 * double(bitstream_bytes) / double(n_input_points);
}

}  // namespace itpcc
