#include <array>
#include <cmath>
#include <stdexcept>

#include "itpcc/quality.hpp"

namespace itpcc {

namespace {

using Poly = std::array<double, 4>;  // c0 + c1 x + c2 x^2 + c3 x^3

// Least-squares cubic via normal equations + Gaussian elimination with
// partial pivoting. Four points give an exact interpolation.
Poly fit_cubic(const std::vector<double>& x, const std::vector<double>& y) {
    std::array<std::array<double, 5>, 4> m{};
    for (size_t i = 0; i < x.size(); ++i) {
        double px[7] = {1, x[i], 0, 0, 0, 0, 0};
        for (int p = 2; p < 7; ++p) px[p] = px[p - 1] * x[i];
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) m[r][c] += px[r + c];
            m[r][4] += px[r] * y[i];
        }
    }
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        std::swap(m[col], m[piv]);
        if (std::abs(m[col][col]) < 1e-12)
            throw std::invalid_argument("bd_metrics: degenerate curve fit");
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            double f = m[r][col] / m[col][col];
            for (int c = col; c < 5; ++c) m[r][c] -= f * m[col][c];
        }
    }
    return {m[0][4] / m[0][0], m[1][4] / m[1][1], m[2][4] / m[2][2], m[3][4] / m[3][3]};
}

// Definite integral of the cubic over [lo, hi].
double integrate(const Poly& p, double lo, double hi) {
    auto anti = [&](double x) {
        return x * (p[0] + x * (p[1] / 2 + x * (p[2] / 3 + x * p[3] / 4)));
    };
    return anti(hi) - anti(lo);
}

// Mean difference of the fitted curves (b minus a) over the shared
// abscissa range.
double mean_gap(const std::vector<double>& xa, const std::vector<double>& ya,
                const std::vector<double>& xb, const std::vector<double>& yb) {
    auto range = [](const std::vector<double>& v) {
        double lo = v[0], hi = v[0];
        for (double x : v) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        return std::pair<double, double>(lo, hi);
    };
    auto [alo, ahi] = range(xa);
    auto [blo, bhi] = range(xb);
    double lo = std::max(alo, blo), hi = std::min(ahi, bhi);
    if (hi <= lo) throw std::invalid_argument("bd_metrics: curves do not overlap");
    Poly pa = fit_cubic(xa, ya), pb = fit_cubic(xb, yb);
    return (integrate(pb, lo, hi) - integrate(pa, lo, hi)) / (hi - lo);
}

}  // namespace

BdResult bd_metrics(const RdCurve& curve_a, const RdCurve& curve_b) {
    if (curve_a.size() < 4 || curve_b.size() < 4)
        throw std::invalid_argument("bd_metrics: need >= 4 points per curve");
    std::vector<double> lr_a, q_a, lr_b, q_b;
    for (const auto& p : curve_a) {
        if (p.rate <= 0.0 || !std::isfinite(p.quality))
            throw std::invalid_argument("bd_metrics: invalid rd point");
        lr_a.push_back(std::log10(p.rate));
        q_a.push_back(p.quality);
    }
    for (const auto& p : curve_b) {
        if (p.rate <= 0.0 || !std::isfinite(p.quality))
            throw std::invalid_argument("bd_metrics: invalid rd point");
        lr_b.push_back(std::log10(p.rate));
        q_b.push_back(p.quality);
    }
    BdResult out;
    out.bd_quality = mean_gap(lr_a, q_a, lr_b, q_b);
    double dlr = mean_gap(q_a, lr_a, q_b, lr_b);
    out.bd_rate_percent = (std::pow(10.0, dlr) - 1.0) * 100.0;
    return out;
}

}  // namespace itpcc
