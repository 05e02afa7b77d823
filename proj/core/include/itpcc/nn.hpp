#pragma once

#include <memory>
#include <string>
#include <vector>

#include "itpcc/tensor.hpp"

namespace itpcc {
namespace nn {

template <class T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Param(std::string n, std::array<int, 5> shape)
        : name(std::move(n)), value(shape), grad(shape) {}
};

// TF-style SAME padding: out = ceil(in / stride).
inline int conv_out_dim(int in, int stride) { return (in + stride - 1) / stride; }
inline int conv_pad(int in, int k, int stride) {
    int out = conv_out_dim(in, stride);
    return std::max((out - 1) * stride + k - in, 0) / 2;
}

// y[n,oc,o*] (+)= sum_ic,k w[oc,ic,k*] * x[n,ic,o*s+k-p]
template <class T>
void conv_fwd(Tensor<T>& y, const Tensor<T>& x, const Tensor<T>& w, int stride,
              int pad) {
    int N = x.shape[0], IC = x.shape[1], K = w.shape[2];
    int OC = w.shape[0];
    int ID = x.shape[2], IH = x.shape[3], IW = x.shape[4];
    int OD = y.shape[2], OH = y.shape[3], OW = y.shape[4];
    for (int n = 0; n < N; ++n)
        for (int oc = 0; oc < OC; ++oc)
            for (int od = 0; od < OD; ++od)
                for (int oh = 0; oh < OH; ++oh)
                    for (int ow = 0; ow < OW; ++ow) {
                        T acc = y(n, oc, od, oh, ow);
                        for (int ic = 0; ic < IC; ++ic)
                            for (int kd = 0; kd < K; ++kd) {
                                int id = od * stride + kd - pad;
                                if (id < 0 || id >= ID) continue;
                                for (int kh = 0; kh < K; ++kh) {
                                    int ih = oh * stride + kh - pad;
                                    if (ih < 0 || ih >= IH) continue;
                                    for (int kw = 0; kw < K; ++kw) {
                                        int iw = ow * stride + kw - pad;
                                        if (iw < 0 || iw >= IW) continue;
                                        acc += w(oc, ic, kd, kh, kw) *
                                               x(n, ic, id, ih, iw);
                                    }
                                }
                            }
                        y(n, oc, od, oh, ow) = acc;
                    }
}

// dx[n,ic,i*] += sum_oc,k w[oc,ic,k*] * dy[n,oc,o*]
template <class T>
void conv_bwd_input(Tensor<T>& dx, const Tensor<T>& dy, const Tensor<T>& w,
                    int stride, int pad) {
    int N = dy.shape[0], OC = dy.shape[1], K = w.shape[2];
    int IC = w.shape[1];
    int ID = dx.shape[2], IH = dx.shape[3], IW = dx.shape[4];
    int OD = dy.shape[2], OH = dy.shape[3], OW = dy.shape[4];
    for (int n = 0; n < N; ++n)
        for (int oc = 0; oc < OC; ++oc)
            for (int od = 0; od < OD; ++od)
                for (int oh = 0; oh < OH; ++oh)
                    for (int ow = 0; ow < OW; ++ow) {
                        T g = dy(n, oc, od, oh, ow);
                        if (g == T(0)) continue;
                        for (int ic = 0; ic < IC; ++ic)
                            for (int kd = 0; kd < K; ++kd) {
                                int id = od * stride + kd - pad;
                                if (id < 0 || id >= ID) continue;
                                for (int kh = 0; kh < K; ++kh) {
                                    int ih = oh * stride + kh - pad;
                                    if (ih < 0 || ih >= IH) continue;
                                    for (int kw = 0; kw < K; ++kw) {
                                        int iw = ow * stride + kw - pad;
                                        if (iw < 0 || iw >= IW) continue;
                                        dx(n, ic, id, ih, iw) +=
                                            g * w(oc, ic, kd, kh, kw);
                                    }
                                }
                            }
                    }
}

// dw[oc,ic,k*] += sum_n,o* x[n,ic,o*s+k-p] * dy[n,oc,o*]
template <class T>
void conv_bwd_weight(Tensor<T>& dw, const Tensor<T>& x, const Tensor<T>& dy,
                     int stride, int pad) {
    int N = x.shape[0], IC = x.shape[1], K = dw.shape[2];
    int OC = dy.shape[1];
    int ID = x.shape[2], IH = x.shape[3], IW = x.shape[4];
    int OD = dy.shape[2], OH = dy.shape[3], OW = dy.shape[4];
    for (int n = 0; n < N; ++n)
        for (int oc = 0; oc < OC; ++oc)
            for (int od = 0; od < OD; ++od)
                for (int oh = 0; oh < OH; ++oh)
                    for (int ow = 0; ow < OW; ++ow) {
                        T g = dy(n, oc, od, oh, ow);
                        if (g == T(0)) continue;
                        for (int ic = 0; ic < IC; ++ic)
                            for (int kd = 0; kd < K; ++kd) {
                                int id = od * stride + kd - pad;
                                if (id < 0 || id >= ID) continue;
                                for (int kh = 0; kh < K; ++kh) {
                                    int ih = oh * stride + kh - pad;
                                    if (ih < 0 || ih >= IH) continue;
                                    for (int kw = 0; kw < K; ++kw) {
                                        int iw = ow * stride + kw - pad;
                                        if (iw < 0 || iw >= IW) continue;
                                        dw(oc, ic, kd, kh, kw) +=
                                            g * x(n, ic, id, ih, iw);
                                    }
                                }
                            }
                    }
}

template <class T>
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor<T> forward(const Tensor<T>& x) = 0;
    virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
    virtual void collect(std::vector<Param<T>*>& out) { (void)out; }
};

// 3D convolution (or its transpose) with SAME-style padding.
// Weight layout: forward (out_ch, in_ch, k, k, k); transposed
// (in_ch, out_ch, k, k, k), acting as the adjoint of the matching
// stride-s convolution, so output spatial dims are in*s.
template <class T>
class Conv3d : public Layer<T> {
public:
    Conv3d(std::string name, int in_ch, int out_ch, int k, int stride,
           bool transposed, Rng& rng)
        : in_ch_(in_ch),
          out_ch_(out_ch),
          k_(k),
          stride_(stride),
          transposed_(transposed),
          weight_(name + ".w", transposed ? std::array<int, 5>{in_ch, out_ch, k, k, k}
                                          : std::array<int, 5>{out_ch, in_ch, k, k, k}),
          bias_(name + ".b", {1, out_ch, 1, 1, 1}) {
        T std = T(std::sqrt(2.0 / (double(in_ch) * k * k * k)));
        for (auto& v : weight_.value.data) v = T(rng.normal()) * std;
        // small nonzero biases keep sparse inputs away from the exact
        // ReLU kink (zero bias would park whole feature maps on it)
        for (auto& v : bias_.value.data) v = T(rng.uniform(-0.05, 0.05));
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        if (x.shape[1] != in_ch_)
            throw std::invalid_argument("Conv3d: channel mismatch");
        x_ = x;
        Tensor<T> y(out_shape(x.shape));
        if (!transposed_) {
            int pad = conv_pad(x.shape[2], k_, stride_);
            conv_fwd(y, x, weight_.value, stride_, pad);
        } else {
            // adjoint: scatter x into the larger grid
            int pad = conv_pad(y.shape[2], k_, stride_);
            conv_bwd_input(y, x, weight_.value, stride_, pad);
        }
        for (int n = 0; n < y.shape[0]; ++n)
            for (int c = 0; c < out_ch_; ++c)
                for (int d = 0; d < y.shape[2]; ++d)
                    for (int h = 0; h < y.shape[3]; ++h)
                        for (int w = 0; w < y.shape[4]; ++w)
                            y(n, c, d, h, w) += bias_.value(0, c, 0, 0, 0);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx(x_.shape);
        if (!transposed_) {
            int pad = conv_pad(x_.shape[2], k_, stride_);
            conv_bwd_input(dx, dy, weight_.value, stride_, pad);
            conv_bwd_weight(weight_.grad, x_, dy, stride_, pad);
        } else {
            int pad = conv_pad(dy.shape[2], k_, stride_);
            conv_fwd(dx, dy, weight_.value, stride_, pad);
            conv_bwd_weight(weight_.grad, dy, x_, stride_, pad);
        }
        for (int n = 0; n < dy.shape[0]; ++n)
            for (int c = 0; c < out_ch_; ++c)
                for (int d = 0; d < dy.shape[2]; ++d)
                    for (int h = 0; h < dy.shape[3]; ++h)
                        for (int w = 0; w < dy.shape[4]; ++w)
                            bias_.grad(0, c, 0, 0, 0) += dy(n, c, d, h, w);
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) override {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

    Param<T>& weight() { return weight_; }

private:
    std::array<int, 5> out_shape(const std::array<int, 5>& in) const {
        if (!transposed_)
            return {in[0], out_ch_, conv_out_dim(in[2], stride_),
                    conv_out_dim(in[3], stride_), conv_out_dim(in[4], stride_)};
        return {in[0], out_ch_, in[2] * stride_, in[3] * stride_, in[4] * stride_};
    }

    int in_ch_, out_ch_, k_, stride_;
    bool transposed_;
    Param<T> weight_, bias_;
    Tensor<T> x_;
};

template <class T>
class ReLU : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x) override {
        mask_.assign(x.count(), false);
        Tensor<T> y = x;
        for (size_t i = 0; i < y.data.size(); ++i) {
            if (y.data[i] > T(0))
                mask_[i] = true;
            else
                y.data[i] = T(0);
        }
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx = dy;
        for (size_t i = 0; i < dx.data.size(); ++i)
            if (!mask_[i]) dx.data[i] = T(0);
        return dx;
    }

private:
    std::vector<bool> mask_;
};

template <class T>
class Sigmoid : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x) override {
        y_ = x;
        for (auto& v : y_.data) v = T(1) / (T(1) + std::exp(-v));
        return y_;
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx = dy;
        for (size_t i = 0; i < dx.data.size(); ++i)
            dx.data[i] *= y_.data[i] * (T(1) - y_.data[i]);
        return dx;
    }

private:
    Tensor<T> y_;
};

// Inception-Residual Block: parallel convolutions with different
// kernel supports, ReLU, channel concatenation, 1x1x1 fuse, residual
// add. Branch widths sum to the channel count (earlier branches take
// the remainder); shape is preserved, and zero weights reduce it to
// the identity.
template <class T>
class Irb : public Layer<T> {
public:
    Irb(std::string name, int channels, const std::vector<int>& kernels, Rng& rng)
        : channels_(channels) {
        int n = int(kernels.size());
        if (channels < n) throw std::invalid_argument("Irb: more branches than channels");
        for (size_t i = 0; i < kernels.size(); ++i) {
            int bc = channels / n + (int(i) < channels % n ? 1 : 0);
            branch_ch_.push_back(bc);
            branches_.push_back(std::make_unique<Conv3d<T>>(
                name + ".br" + std::to_string(i), channels, bc, kernels[i], 1, false,
                rng));
            relus_.push_back(std::make_unique<ReLU<T>>());
        }
        fuse_ = std::make_unique<Conv3d<T>>(name + ".fuse", channels, channels, 1, 1,
                                            false, rng);
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        Tensor<T> cat;
        for (size_t i = 0; i < branches_.size(); ++i) {
            Tensor<T> b = relus_[i]->forward(branches_[i]->forward(x));
            cat = (i == 0) ? std::move(b) : concat_channels(cat, b);
        }
        Tensor<T> y = fuse_->forward(cat);
        y.add(x);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dcat = fuse_->backward(dy);
        Tensor<T> dx = dy;  // residual path
        int c0 = 0;
        for (size_t i = 0; i < branches_.size(); ++i) {
            Tensor<T> db = slice_channels(dcat, c0, c0 + branch_ch_[i]);
            c0 += branch_ch_[i];
            dx.add(branches_[i]->backward(relus_[i]->backward(db)));
        }
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) override {
        for (auto& b : branches_) b->collect(out);
        fuse_->collect(out);
    }

private:
    int channels_;
    std::vector<int> branch_ch_;
    std::vector<std::unique_ptr<Conv3d<T>>> branches_;
    std::vector<std::unique_ptr<ReLU<T>>> relus_;
    std::unique_ptr<Conv3d<T>> fuse_;
};

template <class T>
class Sequential : public Layer<T> {
public:
    Sequential() = default;

    Sequential& add(std::unique_ptr<Layer<T>> l) {
        layers_.push_back(std::move(l));
        return *this;
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        Tensor<T> y = x;
        for (auto& l : layers_) y = l->forward(y);
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> g = dy;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
            g = (*it)->backward(g);
        return g;
    }
    void collect(std::vector<Param<T>*>& out) override {
        for (auto& l : layers_) l->collect(out);
    }

private:
    std::vector<std::unique_ptr<Layer<T>>> layers_;
};

// ---- losses ----

// Focal loss over a binary occupancy tensor, natural log, mean over
// all elements. Probabilities are clamped to [eps, 1-eps].
template <class T>
T focal_loss(const Tensor<T>& u, const Tensor<T>& v, T alpha, T gamma,
             Tensor<T>* dv = nullptr, T eps = T(1e-7)) {
    if (u.shape != v.shape)
        throw std::invalid_argument("focal_loss: shape mismatch");
    T total = T(0);
    T n = T(double(u.count()));
    if (dv) *dv = Tensor<T>(v.shape);
    for (size_t i = 0; i < u.data.size(); ++i) {
        T p = std::clamp(v.data[i], eps, T(1) - eps);
        bool clamped = v.data[i] < eps || v.data[i] > T(1) - eps;
        T g;
        T fl;
        if (u.data[i] > T(0.5)) {
            T q = T(1) - p;
            fl = -alpha * std::pow(q, gamma) * std::log(p);
            g = -alpha * (-gamma * std::pow(q, gamma - T(1)) * std::log(p) +
                          std::pow(q, gamma) / p);
        } else {
            fl = -(T(1) - alpha) * std::pow(p, gamma) * std::log(T(1) - p);
            g = -(T(1) - alpha) * (gamma * std::pow(p, gamma - T(1)) *
                                       std::log(T(1) - p) -
                                   std::pow(p, gamma) / (T(1) - p));
        }
        total += fl;
        if (dv) dv->data[i] = clamped ? T(0) : g / n;
    }
    return total / n;
}

// Colour MSE over the occupied voxels of the input block: per-voxel
// mean over the 3 colour channels, then mean over occupied voxels.
// Tensors are 4-channel; channel 0 is geometry.
template <class T>
T color_mse(const Tensor<T>& input, const Tensor<T>& decoded,
            Tensor<T>* ddecoded = nullptr) {
    if (input.shape != decoded.shape || input.shape[1] != 4)
        throw std::invalid_argument("color_mse: need matching 4-channel blocks");
    if (ddecoded) *ddecoded = Tensor<T>(decoded.shape);
    T total = T(0);
    int64_t n_input = 0;
    int N = input.shape[0];
    for (int n = 0; n < N; ++n)
        for (int d = 0; d < input.shape[2]; ++d)
            for (int h = 0; h < input.shape[3]; ++h)
                for (int w = 0; w < input.shape[4]; ++w)
                    if (input(n, 0, d, h, w) > T(0.5)) ++n_input;
    if (n_input == 0) throw std::invalid_argument("color_mse: empty input block");
    for (int n = 0; n < N; ++n)
        for (int d = 0; d < input.shape[2]; ++d)
            for (int h = 0; h < input.shape[3]; ++h)
                for (int w = 0; w < input.shape[4]; ++w) {
                    if (input(n, 0, d, h, w) <= T(0.5)) continue;
                    for (int c = 1; c < 4; ++c) {
                        T diff = input(n, c, d, h, w) - decoded(n, c, d, h, w);
                        total += diff * diff;
                        if (ddecoded)
                            (*ddecoded)(n, c, d, h, w) =
                                T(-2) * diff / (T(3) * T(double(n_input)));
                    }
                }
    return total / (T(3) * T(double(n_input)));
}

template <class T>
T total_distortion(T d_geo, T d_col, T omega) {
    return (T(1) - omega) * d_geo + omega * d_col;
}

// ---- optimizer ----

template <class T>
class Adam {
public:
    Adam(std::vector<Param<T>*> params, T lr, T beta1 = T(0.9), T beta2 = T(0.999),
         T eps = T(1e-8))
        : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
        for (auto* p : params_) {
            m_.emplace_back(p->value.shape);
            v_.emplace_back(p->value.shape);
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->grad.fill(T(0));
    }

    void step() {
        ++t_;
        T bc1 = T(1) - std::pow(b1_, T(t_));
        T bc2 = T(1) - std::pow(b2_, T(t_));
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& val = params_[i]->value.data;
            auto& grad = params_[i]->grad.data;
            for (size_t j = 0; j < val.size(); ++j) {
                T g = grad[j];
                m_[i].data[j] = b1_ * m_[i].data[j] + (T(1) - b1_) * g;
                v_[i].data[j] = b2_ * v_[i].data[j] + (T(1) - b2_) * g * g;
                T mhat = m_[i].data[j] / bc1;
                T vhat = v_[i].data[j] / bc2;
                val[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    int64_t steps() const { return t_; }

private:
    std::vector<Param<T>*> params_;
    T lr_, b1_, b2_, eps_;
    std::vector<Tensor<T>> m_, v_;
    int64_t t_ = 0;
};

// Numerically stable softplus and its derivative (the logistic).
template <class T>
T softplus(T x) {
    return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
template <class T>
T logistic(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

}  // namespace nn
}  // namespace itpcc
