#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace itpcc {

// Dense 5D tensor, shape (batch, channels, depth, height, width).
// T is float on the production path, double for gradient checking.
template <class T>
struct Tensor {
    std::array<int, 5> shape{0, 0, 0, 0, 0};
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::array<int, 5> s) : shape(s) {
        data.assign(count(), T(0));
    }
    static Tensor zeros_like(const Tensor& o) { return Tensor(o.shape); }

    size_t count() const {
        return size_t(shape[0]) * shape[1] * shape[2] * shape[3] * shape[4];
    }
    T& operator()(int n, int c, int d, int h, int w) {
        return data[((((size_t(n) * shape[1] + c) * shape[2] + d) * shape[3] + h) *
                         shape[4] +
                     w)];
    }
    T operator()(int n, int c, int d, int h, int w) const {
        return data[((((size_t(n) * shape[1] + c) * shape[2] + d) * shape[3] + h) *
                         shape[4] +
                     w)];
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }
    void add(const Tensor& o) {
        assert(shape == o.shape);
        for (size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    }
    void scale(T s) {
        for (auto& v : data) v *= s;
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out(shape);
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
        return out;
    }
};

// Deterministic, platform-independent RNG (splitmix64 core).
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    // uniform in [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }
    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // standard normal (Box-Muller)
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        u1 = std::max(u1, 1e-300);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
    uint64_t next_below(uint64_t n) { return next_u64() % n; }

private:
    uint64_t state_;
};

template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape[0] != b.shape[0] || a.shape[2] != b.shape[2] ||
        a.shape[3] != b.shape[3] || a.shape[4] != b.shape[4])
        throw std::invalid_argument("concat_channels: shape mismatch");
    Tensor<T> out({a.shape[0], a.shape[1] + b.shape[1], a.shape[2], a.shape[3],
                   a.shape[4]});
    for (int n = 0; n < a.shape[0]; ++n) {
        for (int c = 0; c < a.shape[1]; ++c)
            for (int d = 0; d < a.shape[2]; ++d)
                for (int h = 0; h < a.shape[3]; ++h)
                    for (int w = 0; w < a.shape[4]; ++w)
                        out(n, c, d, h, w) = a(n, c, d, h, w);
        for (int c = 0; c < b.shape[1]; ++c)
            for (int d = 0; d < b.shape[2]; ++d)
                for (int h = 0; h < b.shape[3]; ++h)
                    for (int w = 0; w < b.shape[4]; ++w)
                        out(n, a.shape[1] + c, d, h, w) = b(n, c, d, h, w);
    }
    return out;
}

template <class T>
Tensor<T> slice_channels(const Tensor<T>& x, int c0, int c1) {
    Tensor<T> out({x.shape[0], c1 - c0, x.shape[2], x.shape[3], x.shape[4]});
    for (int n = 0; n < x.shape[0]; ++n)
        for (int c = c0; c < c1; ++c)
            for (int d = 0; d < x.shape[2]; ++d)
                for (int h = 0; h < x.shape[3]; ++h)
                    for (int w = 0; w < x.shape[4]; ++w)
                        out(n, c - c0, d, h, w) = x(n, c, d, h, w);
    return out;
}

// Low-corner spatial crop to (d1, h1, w1); inverse of pad_spatial.
template <class T>
Tensor<T> crop_spatial(const Tensor<T>& x, int d1, int h1, int w1) {
    if (x.shape[2] == d1 && x.shape[3] == h1 && x.shape[4] == w1) return x;
    Tensor<T> out({x.shape[0], x.shape[1], d1, h1, w1});
    for (int n = 0; n < x.shape[0]; ++n)
        for (int c = 0; c < x.shape[1]; ++c)
            for (int d = 0; d < d1; ++d)
                for (int h = 0; h < h1; ++h)
                    for (int w = 0; w < w1; ++w)
                        out(n, c, d, h, w) = x(n, c, d, h, w);
    return out;
}

// Zero-pads the high spatial borders to (d1, h1, w1); gradient of
// crop_spatial.
template <class T>
Tensor<T> pad_spatial(const Tensor<T>& x, int d1, int h1, int w1) {
    if (x.shape[2] == d1 && x.shape[3] == h1 && x.shape[4] == w1) return x;
    Tensor<T> out({x.shape[0], x.shape[1], d1, h1, w1});
    for (int n = 0; n < x.shape[0]; ++n)
        for (int c = 0; c < x.shape[1]; ++c)
            for (int d = 0; d < x.shape[2]; ++d)
                for (int h = 0; h < x.shape[3]; ++h)
                    for (int w = 0; w < x.shape[4]; ++w)
                        out(n, c, d, h, w) = x(n, c, d, h, w);
    return out;
}

}  // namespace itpcc
