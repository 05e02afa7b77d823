#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "itpcc/nn.hpp"
#include "itpcc/pointcloud.hpp"
#include "itpcc/sampling.hpp"
#include "itpcc/tensor.hpp"

namespace itpcc {

// Autoencoder geometry: three stride-2 stages (latents are B/8 per
// axis), filter ramp {w, 2w, 4w}. The full-scale configuration is
// w=32; tests shrink w.
struct CodecArch {
    int in_channels = 1;  // 1 geometry-only, 4 joint geometry+colour
    int width = 32;

    static constexpr int kStride = 8;

    int latent_channels() const { return 4 * width; }
    int hyper_channels() const { return 2 * width; }

    std::string to_json() const {
        nlohmann::json j{{"type", "codec"},
                         {"in_channels", in_channels},
                         {"width", width}};
        return j.dump();
    }
    static CodecArch from_json(const std::string& s) {
        auto j = nlohmann::json::parse(s);
        if (j.value("type", "") != "codec")
            throw std::runtime_error("codec arch: wrong checkpoint type");
        CodecArch a;
        a.in_channels = j.at("in_channels").get<int>();
        a.width = j.at("width").get<int>();
        return a;
    }
};

struct TrainConfig {
    double lambda = 0.001;
    double alpha = 0.7;
    double gamma = 2.0;
    double omega = 0.5;
    double lr = 1e-4;
    int batch = 16;
    int patience = 5;
    int max_epochs = 100;
    uint64_t seed = 1;
};

// ---- block <-> tensor plumbing ----

template <class T>
Tensor<T> block_to_tensor(const VoxelBlock& b) {
    Tensor<T> t({1, b.channels, b.size, b.size, b.size});
    for (size_t i = 0; i < b.data.size(); ++i) t.data[i] = T(b.data[i]);
    return t;
}

template <class T>
VoxelBlock tensor_to_block(const Tensor<T>& t, Vec3i origin, uint32_t n_input) {
    VoxelBlock b;
    b.origin = origin;
    b.size = t.shape[2];
    b.channels = t.shape[1];
    b.n_input = n_input;
    b.data.resize(t.count());
    for (size_t i = 0; i < t.count(); ++i) b.data[i] = float(t.data[i]);
    return b;
}

// ---- explicit quantization ----

template <class T>
Tensor<T> quantize(const Tensor<T>& y, double qs) {
    if (qs <= 0.0) throw std::invalid_argument("quantize: qs must be positive");
    Tensor<T> q(y.shape);
    for (size_t i = 0; i < y.data.size(); ++i)
        q.data[i] = T(round_half_away(double(y.data[i]) / qs));
    return q;
}

template <class T>
Tensor<T> dequantize(const Tensor<T>& q, double qs) {
    if (qs <= 0.0) throw std::invalid_argument("dequantize: qs must be positive");
    Tensor<T> y = q;
    y.scale(T(qs));
    return y;
}

// Training-time quantization surrogate: elementwise U(-0.5, 0.5).
template <class T>
Tensor<T> noise_proxy(const Tensor<T>& y, Rng& rng) {
    Tensor<T> out = y;
    for (auto& v : out.data) v += T(rng.uniform() - 0.5);
    return out;
}

// ---- differentiable rate terms ----

namespace detail {
constexpr double kMinMass = 0x1.0p-64;
constexpr double kSigmaFloor = 1e-3;
constexpr double kInvLn2 = 1.4426950408889634;

template <class T>
T normal_cdf(T x) {
    return T(0.5) * std::erfc(-x / T(std::sqrt(2.0)));
}
template <class T>
T normal_pdf(T x) {
    return std::exp(-x * x / T(2)) / T(std::sqrt(2.0 * M_PI));
}
}  // namespace detail

// -sum log2 P(y_i) under the discretized Gaussian N(mu_i, sigma_i).
// Works for integer-valued or noisy continuous y. Optional gradients
// (accumulated, caller-owned zero-initialized tensors).
template <class T>
T gaussian_bits(const Tensor<T>& y, const Tensor<T>& mu, const Tensor<T>& sigma,
                Tensor<T>* dy = nullptr, Tensor<T>* dmu = nullptr,
                Tensor<T>* dsigma = nullptr) {
    if (y.shape != mu.shape || y.shape != sigma.shape)
        throw std::invalid_argument("gaussian_bits: shape mismatch");
    T bits = T(0);
    for (size_t i = 0; i < y.data.size(); ++i) {
        T s = sigma.data[i];
        T d = y.data[i] - mu.data[i];
        // evaluate the interval mass on the negative side (P is even in
        // d): cdf differences there keep full relative precision, while
        // the positive tail cancels catastrophically
        T flip = d > T(0) ? T(-1) : T(1);
        T m = flip * d;
        T a = (m + T(0.5)) / s;
        T b = (m - T(0.5)) / s;
        T p = detail::normal_cdf(a) - detail::normal_cdf(b);
        bool clamped = !(p > T(detail::kMinMass));
        if (clamped) p = T(detail::kMinMass);
        bits -= std::log2(p);
        if (!clamped && (dy || dmu || dsigma)) {
            T coeff = -T(detail::kInvLn2) / p;  // d(-log2 p)/dp
            T pa = detail::normal_pdf(a), pb = detail::normal_pdf(b);
            T dp_dy = flip * (pa - pb) / s;  // odd in d
            if (dy) dy->data[i] += coeff * dp_dy;
            if (dmu) dmu->data[i] += coeff * (-dp_dy);
            if (dsigma) dsigma->data[i] += coeff * (-(pa * a - pb * b) / s);
        }
    }
    return bits;
}

// Same contract under a per-channel discretized logistic.
template <class T>
T logistic_bits(const Tensor<T>& z, const Tensor<T>& loc, const Tensor<T>& scale,
                Tensor<T>* dz = nullptr, Tensor<T>* dloc = nullptr,
                Tensor<T>* dscale = nullptr) {
    int C = z.shape[1];
    if (loc.shape[1] != C || scale.shape[1] != C)
        throw std::invalid_argument("logistic_bits: channel mismatch");
    auto sig = [](T x) { return T(1) / (T(1) + std::exp(-x)); };
    T bits = T(0);
    size_t per_c = z.count() / size_t(z.shape[0] * C);
    for (size_t i = 0; i < z.data.size(); ++i) {
        int c = int((i / per_c) % size_t(C));
        T l = loc.data[c], s = scale.data[c];
        T d = z.data[i] - l;
        // mirror to the negative side (mass is even in d); the sigmoid
        // saturates at 1 on the positive side and cancels
        T flip = d > T(0) ? T(-1) : T(1);
        T m = flip * d;
        T a = (m + T(0.5)) / s;
        T b = (m - T(0.5)) / s;
        T sa = sig(a), sb = sig(b);
        T p = sa - sb;
        bool clamped = !(p > T(detail::kMinMass));
        if (clamped) p = T(detail::kMinMass);
        bits -= std::log2(p);
        if (!clamped && (dz || dloc || dscale)) {
            T coeff = -T(detail::kInvLn2) / p;
            T da = sa * (T(1) - sa), db = sb * (T(1) - sb);
            T dp_dz = flip * (da - db) / s;
            if (dz) dz->data[i] += coeff * dp_dz;
            if (dloc) dloc->data[c] += coeff * (-dp_dz);
            if (dscale) dscale->data[c] += coeff * (-(da * a - db * b) / s);
        }
    }
    return bits;
}

// Per-element rate estimate of already-quantized integer latents coded
// with step qs: symbols follow N(mu/qs, sigma/qs).
template <class T>
T rate_estimate(const Tensor<T>& q, const Tensor<T>& mu, const Tensor<T>& sigma,
                double qs) {
    Tensor<T> mu_s = mu, sig_s = sigma;
    mu_s.scale(T(1.0 / qs));
    sig_s.scale(T(1.0 / qs));
    return gaussian_bits(q, mu_s, sig_s);
}

template <class T>
struct LossParts {
    T loss = T(0);
    T distortion = T(0);
    T rate_bits = T(0);
};

// ---- the model ----

template <class T>
class CodingModel {
public:
    CodingModel(CodecArch arch, uint64_t seed)
        : arch_(arch),
          prior_loc_("prior.loc", {1, arch.hyper_channels(), 1, 1, 1}),
          prior_scale_("prior.scale", {1, arch.hyper_channels(), 1, 1, 1}) {
        Rng rng(seed);
        int w = arch.width, c = arch.in_channels;
        int cy = arch.latent_channels(), cz = arch.hyper_channels();
        using namespace nn;

        analysis_.add(std::make_unique<Conv3d<T>>("ana.c0", c, w, 3, 2, false, rng));
        analysis_.add(std::make_unique<ReLU<T>>());
        analysis_.add(std::make_unique<Irb<T>>("ana.irb0", w, kCodecKernels, rng));
        analysis_.add(std::make_unique<Conv3d<T>>("ana.c1", w, 2 * w, 3, 2, false, rng));
        analysis_.add(std::make_unique<ReLU<T>>());
        analysis_.add(std::make_unique<Irb<T>>("ana.irb1", 2 * w, kCodecKernels, rng));
        analysis_.add(std::make_unique<Conv3d<T>>("ana.c2", 2 * w, cy, 3, 2, false, rng));

        synthesis_.add(std::make_unique<Conv3d<T>>("syn.c0", cy, 2 * w, 3, 2, true, rng));
        synthesis_.add(std::make_unique<ReLU<T>>());
        synthesis_.add(std::make_unique<Irb<T>>("syn.irb0", 2 * w, kCodecKernels, rng));
        synthesis_.add(std::make_unique<Conv3d<T>>("syn.c1", 2 * w, w, 3, 2, true, rng));
        synthesis_.add(std::make_unique<ReLU<T>>());
        synthesis_.add(std::make_unique<Irb<T>>("syn.irb1", w, kCodecKernels, rng));
        synthesis_.add(std::make_unique<Conv3d<T>>("syn.c2", w, c, 3, 2, true, rng));
        synthesis_.add(std::make_unique<Sigmoid<T>>());

        hyper_enc_.add(std::make_unique<Conv3d<T>>("hen.c0", cy, cz, 3, 1, false, rng));
        hyper_enc_.add(std::make_unique<ReLU<T>>());
        hyper_enc_.add(std::make_unique<Conv3d<T>>("hen.c1", cz, cz, 3, 2, false, rng));
        hyper_enc_.add(std::make_unique<ReLU<T>>());
        hyper_enc_.add(std::make_unique<Conv3d<T>>("hen.c2", cz, cz, 3, 1, false, rng));

        hyper_dec_.add(std::make_unique<Conv3d<T>>("hde.c0", cz, cz, 3, 1, false, rng));
        hyper_dec_.add(std::make_unique<ReLU<T>>());
        hyper_dec_.add(std::make_unique<Conv3d<T>>("hde.c1", cz, cz, 3, 2, true, rng));
        hyper_dec_.add(std::make_unique<ReLU<T>>());
        hyper_dec_.add(
            std::make_unique<Conv3d<T>>("hde.c2", cz, 2 * cy, 3, 1, false, rng));
    }

    const CodecArch& arch() const { return arch_; }

    Tensor<T> analysis(const Tensor<T>& x) {
        if (x.shape[1] != arch_.in_channels || x.shape[2] % CodecArch::kStride != 0)
            throw std::invalid_argument("analysis: incompatible block shape");
        return analysis_.forward(x);
    }
    Tensor<T> synthesis(const Tensor<T>& yhat) { return synthesis_.forward(yhat); }
    Tensor<T> hyper_analysis(const Tensor<T>& y) { return hyper_enc_.forward(y); }
    // The transposed conv doubles an odd hyper-latent past the main
    // latent's edge; crop back to y_spatial so the pair always
    // round-trips.
    Tensor<T> hyper_synthesis_raw(const Tensor<T>& zhat, int y_spatial) {
        return crop_spatial(hyper_dec_.forward(zhat), y_spatial, y_spatial,
                            y_spatial);
    }

    // Splits the raw hyper-decoder output into mu and a positive sigma
    // (softplus + floor).
    void mu_sigma(const Tensor<T>& raw, Tensor<T>& mu, Tensor<T>& sigma) const {
        int cy = arch_.latent_channels();
        mu = slice_channels(raw, 0, cy);
        sigma = slice_channels(raw, cy, 2 * cy);
        for (auto& v : sigma.data) v = T(detail::kSigmaFloor) + nn::softplus(v);
    }

    // Per-channel factorized prior parameters with positive scale.
    void prior(Tensor<T>& loc, Tensor<T>& scale) const {
        loc = prior_loc_.value;
        scale = prior_scale_.value;
        for (auto& v : scale.data) v = T(detail::kSigmaFloor) + nn::softplus(v);
    }

    std::vector<nn::Param<T>*> params() {
        std::vector<nn::Param<T>*> out;
        analysis_.collect(out);
        synthesis_.collect(out);
        hyper_enc_.collect(out);
        hyper_dec_.collect(out);
        out.push_back(&prior_loc_);
        out.push_back(&prior_scale_);
        return out;
    }

    // One full rate-distortion loss evaluation (distortion + weighted
    // bits per input point) on a block
    // tensor. training=true uses the uniform-noise proxy (qs=1);
    // otherwise latents are rounded. Gradients (when requested)
    // accumulate into the parameters' grad tensors.
    LossParts<T> step_loss(const Tensor<T>& x, const TrainConfig& cfg,
                           uint64_t noise_seed, bool training, bool grads) {
        int64_t n_input = 0;
        for (int d = 0; d < x.shape[2]; ++d)
            for (int h = 0; h < x.shape[3]; ++h)
                for (int w = 0; w < x.shape[4]; ++w)
                    if (x(0, 0, d, h, w) > T(0.5)) ++n_input;
        if (n_input == 0) throw std::invalid_argument("step_loss: empty block");

        Tensor<T> y = analysis(x);
        Tensor<T> z = hyper_enc_.forward(y);

        Rng noise_rng(noise_seed);
        Tensor<T> zt = training ? noise_proxy(z, noise_rng) : quantize(z, 1.0);
        Tensor<T> yt = training ? noise_proxy(y, noise_rng) : quantize(y, 1.0);

        Tensor<T> raw_full = hyper_dec_.forward(zt);
        Tensor<T> raw =
            crop_spatial(raw_full, y.shape[2], y.shape[3], y.shape[4]);
        Tensor<T> mu, sigma;
        mu_sigma(raw, mu, sigma);

        Tensor<T> dec = synthesis_.forward(yt);

        // distortion
        Tensor<T> u = slice_channels(x, 0, 1);
        Tensor<T> v = slice_channels(dec, 0, 1);
        Tensor<T> dv_geo;
        T d_geo = nn::focal_loss(u, v, T(cfg.alpha), T(cfg.gamma),
                                 grads ? &dv_geo : nullptr);
        T d_col = T(0);
        Tensor<T> ddec_col;
        if (arch_.in_channels == 4)
            d_col = nn::color_mse(x, dec, grads ? &ddec_col : nullptr);
        T distortion = arch_.in_channels == 4
                           ? nn::total_distortion(d_geo, d_col, T(cfg.omega))
                           : d_geo;

        // rate
        Tensor<T> dyt_r(y.shape), dmu(mu.shape), dsigma(sigma.shape);
        Tensor<T> dzt_r(z.shape), dloc(prior_loc_.value.shape),
            dscale(prior_scale_.value.shape);
        Tensor<T> loc, scale;
        prior(loc, scale);
        T bits = gaussian_bits(yt, mu, sigma, grads ? &dyt_r : nullptr,
                               grads ? &dmu : nullptr, grads ? &dsigma : nullptr);
        bits += logistic_bits(zt, loc, scale, grads ? &dzt_r : nullptr,
                              grads ? &dloc : nullptr, grads ? &dscale : nullptr);

        T rate_w = T(cfg.lambda) / T(double(n_input));
        LossParts<T> parts;
        parts.distortion = distortion;
        parts.rate_bits = bits;
        parts.loss = distortion + rate_w * bits;
        if (!grads) return parts;

        // backward: distortion path
        Tensor<T> ddec(dec.shape);
        T geo_w = arch_.in_channels == 4 ? T(1) - T(cfg.omega) : T(1);
        for (int d = 0; d < dec.shape[2]; ++d)
            for (int h = 0; h < dec.shape[3]; ++h)
                for (int w = 0; w < dec.shape[4]; ++w)
                    ddec(0, 0, d, h, w) = geo_w * dv_geo(0, 0, d, h, w);
        if (arch_.in_channels == 4)
            for (size_t i = 0; i < ddec.data.size(); ++i)
                ddec.data[i] += T(cfg.omega) * ddec_col.data[i];

        Tensor<T> dyt = synthesis_.backward(ddec);
        for (size_t i = 0; i < dyt.data.size(); ++i)
            dyt.data[i] += rate_w * dyt_r.data[i];

        // rate path through the hyper decoder; sigma = floor + softplus
        int cy = arch_.latent_channels();
        Tensor<T> draw(raw.shape);
        for (int c = 0; c < cy; ++c)
            for (int d = 0; d < raw.shape[2]; ++d)
                for (int h = 0; h < raw.shape[3]; ++h)
                    for (int w = 0; w < raw.shape[4]; ++w) {
                        draw(0, c, d, h, w) = rate_w * dmu(0, c, d, h, w);
                        draw(0, cy + c, d, h, w) =
                            rate_w * dsigma(0, c, d, h, w) *
                            nn::logistic(raw(0, cy + c, d, h, w));
                    }

        Tensor<T> dzt = hyper_dec_.backward(pad_spatial(
            draw, raw_full.shape[2], raw_full.shape[3], raw_full.shape[4]));
        for (size_t i = 0; i < dzt.data.size(); ++i)
            dzt.data[i] += rate_w * dzt_r.data[i];

        // prior parameters (scale passes through its softplus)
        for (size_t c = 0; c < prior_loc_.value.data.size(); ++c) {
            prior_loc_.grad.data[c] += rate_w * dloc.data[c];
            prior_scale_.grad.data[c] += rate_w * dscale.data[c] *
                                         nn::logistic(prior_scale_.value.data[c]);
        }

        // noise/rounding treated as identity for gradients
        Tensor<T> dy = hyper_enc_.backward(dzt);
        dy.add(dyt);
        analysis_.backward(dy);
        return parts;
    }

    static const std::vector<int> kCodecKernels;

private:
    CodecArch arch_;
    nn::Sequential<T> analysis_, synthesis_, hyper_enc_, hyper_dec_;
    nn::Param<T> prior_loc_, prior_scale_;
};

template <class T>
const std::vector<int> CodingModel<T>::kCodecKernels = {1, 3, 5};

// ---- dataset and training ----

// Partitions each cloud into B^3 blocks and drops blocks with fewer
// than 500 filled voxels.
inline std::vector<VoxelBlock> make_training_blocks(
    const std::vector<PointCloud>& clouds, int block_size = 64,
    bool with_color = false, uint32_t min_voxels = 500) {
    std::vector<VoxelBlock> out;
    for (const auto& pc : clouds)
        for (auto& b : partition(pc, block_size, with_color))
            if (b.n_input >= min_voxels) out.push_back(std::move(b));
    return out;
}

struct TrainResult {
    int epochs = 0;
    double initial_train_loss = 0;
    double final_train_loss = 0;
    double best_val_loss = 0;
    std::vector<double> val_history;
};

inline TrainResult train(CodingModel<float>& model,
                         const std::vector<VoxelBlock>& train_blocks,
                         const std::vector<VoxelBlock>& val_blocks,
                         const TrainConfig& cfg) {
    if (train_blocks.empty()) throw std::invalid_argument("train: empty dataset");
    std::vector<Tensor<float>> xs, vs;
    for (const auto& b : train_blocks) xs.push_back(block_to_tensor<float>(b));
    for (const auto& b : val_blocks) vs.push_back(block_to_tensor<float>(b));
    if (vs.empty()) vs = xs;  // caller provided no split

    auto params = model.params();
    nn::Adam<float> opt(params, float(cfg.lr));
    Rng shuffle_rng(cfg.seed);

    auto validate = [&](uint64_t epoch) {
        double total = 0;
        for (size_t i = 0; i < vs.size(); ++i)
            total += model.step_loss(vs[i], cfg, 0, false, false).loss;
        (void)epoch;
        return total / double(vs.size());
    };

    TrainResult res;
    std::vector<Tensor<float>> best;
    double best_val = 0;
    int stale = 0;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::vector<size_t> order(xs.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);

        double epoch_loss = 0;
        for (size_t start = 0; start < order.size(); start += size_t(cfg.batch)) {
            size_t end = std::min(order.size(), start + size_t(cfg.batch));
            opt.zero_grad();
            for (size_t i = start; i < end; ++i) {
                uint64_t noise_seed =
                    cfg.seed ^ (uint64_t(epoch) << 32) ^ (order[i] + 1);
                epoch_loss +=
                    model.step_loss(xs[order[i]], cfg, noise_seed, true, true).loss;
            }
            float inv = 1.0f / float(end - start);
            for (auto* p : params) p->grad.scale(inv);
            opt.step();
        }
        epoch_loss /= double(xs.size());
        if (epoch == 0) res.initial_train_loss = epoch_loss;
        res.final_train_loss = epoch_loss;

        double val = validate(uint64_t(epoch));
        res.val_history.push_back(val);
        res.epochs = epoch + 1;
        if (best.empty() || val < best_val) {
            best_val = val;
            best.clear();
            for (auto* p : params) best.push_back(p->value);
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    for (size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
    res.best_val_loss = best_val;
    return res;
}

}  // namespace itpcc
