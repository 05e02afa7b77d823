#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "itpcc/coding_model.hpp"
#include "itpcc/nn.hpp"
#include "itpcc/pointcloud.hpp"
#include "itpcc/tensor.hpp"

namespace itpcc {

// U-net super-resolution head applied after basic up-sampling. One
// model per sampling factor; base channel count C doubles per
// contracting stage, the expanding path concatenates same-scale
// features.
struct AbuArch {
    int in_channels = 1;
    int base = 16;
    int stages = 3;
    int sf = 2;

    int stride() const { return 1 << stages; }

    std::string to_json() const {
        nlohmann::json j{{"type", "abu"},
                         {"in_channels", in_channels},
                         {"base", base},
                         {"stages", stages},
                         {"sf", sf}};
        return j.dump();
    }
    static AbuArch from_json(const std::string& s) {
        auto j = nlohmann::json::parse(s);
        if (j.value("type", "") != "abu")
            throw std::runtime_error("abu arch: wrong checkpoint type");
        AbuArch a;
        a.in_channels = j.at("in_channels").get<int>();
        a.base = j.at("base").get<int>();
        a.stages = j.at("stages").get<int>();
        a.sf = j.at("sf").get<int>();
        return a;
    }
};

template <class T>
class AbuModel {
public:
    AbuModel(AbuArch arch, uint64_t seed) : arch_(arch) {
        Rng rng(seed);
        using namespace nn;
        int c = arch.base;
        stem_ = std::make_unique<Conv3d<T>>("abu.stem", arch.in_channels, c, 3, 1,
                                            false, rng);
        for (int i = 0; i < arch.stages; ++i) {
            int ci = c << i;
            down_.push_back(std::make_unique<Conv3d<T>>(
                "abu.down" + std::to_string(i), ci, 2 * ci, 3, 2, false, rng));
            relu_d_.push_back(std::make_unique<ReLU<T>>());
            irb_d_.push_back(std::make_unique<Irb<T>>("abu.dirb" + std::to_string(i),
                                                      2 * ci, kAbuKernels, rng));
        }
        for (int j = 0; j < arch.stages; ++j) {
            int cj = c << j;  // channels at the expanded (shallower) level
            up_.push_back(std::make_unique<Conv3d<T>>("abu.up" + std::to_string(j),
                                                      2 * cj, cj, 3, 2, true, rng));
            relu_u_.push_back(std::make_unique<ReLU<T>>());
            fuse_.push_back(std::make_unique<Conv3d<T>>(
                "abu.fuse" + std::to_string(j), 2 * cj, cj, 3, 1, false, rng));
            relu_f_.push_back(std::make_unique<ReLU<T>>());
            irb_u_.push_back(std::make_unique<Irb<T>>("abu.uirb" + std::to_string(j),
                                                      cj, kAbuKernels, rng));
        }
        head_ = std::make_unique<Conv3d<T>>("abu.head", c, arch.in_channels, 3, 1,
                                            false, rng);
    }

    const AbuArch& arch() const { return arch_; }

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.shape[1] != arch_.in_channels || x.shape[2] % arch_.stride() != 0)
            throw std::invalid_argument("abu_forward: incompatible block shape");
        acts_.assign(size_t(arch_.stages) + 1, Tensor<T>{});
        acts_[0] = relu_stem_.forward(stem_->forward(x));
        for (int i = 0; i < arch_.stages; ++i)
            acts_[i + 1] = irb_d_[i]->forward(
                relu_d_[i]->forward(down_[i]->forward(acts_[i])));
        Tensor<T> h = acts_[arch_.stages];
        for (int j = arch_.stages - 1; j >= 0; --j) {
            Tensor<T> u = relu_u_[j]->forward(up_[j]->forward(h));
            h = irb_u_[j]->forward(
                relu_f_[j]->forward(fuse_[j]->forward(concat_channels(u, acts_[j]))));
        }
        return sigmoid_.forward(head_->forward(h));
    }

    Tensor<T> backward(const Tensor<T>& dout) {
        Tensor<T> dh = head_->backward(sigmoid_.backward(dout));
        std::vector<Tensor<T>> dskip(size_t(arch_.stages));
        for (int j = 0; j < arch_.stages; ++j) {
            int cj = arch_.base << j;
            Tensor<T> dcat =
                fuse_[j]->backward(relu_f_[j]->backward(irb_u_[j]->backward(dh)));
            dskip[j] = slice_channels(dcat, cj, 2 * cj);
            dh = up_[j]->backward(relu_u_[j]->backward(slice_channels(dcat, 0, cj)));
        }
        for (int i = arch_.stages - 1; i >= 0; --i) {
            dh = down_[i]->backward(
                relu_d_[i]->backward(irb_d_[i]->backward(dh)));
            dh.add(dskip[i]);
        }
        return stem_->backward(relu_stem_.backward(dh));
    }

    std::vector<nn::Param<T>*> params() {
        std::vector<nn::Param<T>*> out;
        stem_->collect(out);
        for (int i = 0; i < arch_.stages; ++i) {
            down_[i]->collect(out);
            irb_d_[i]->collect(out);
        }
        for (int j = 0; j < arch_.stages; ++j) {
            up_[j]->collect(out);
            fuse_[j]->collect(out);
            irb_u_[j]->collect(out);
        }
        head_->collect(out);
        return out;
    }

    static const std::vector<int> kAbuKernels;

private:
    AbuArch arch_;
    std::unique_ptr<nn::Conv3d<T>> stem_, head_;
    nn::ReLU<T> relu_stem_;
    nn::Sigmoid<T> sigmoid_;
    std::vector<std::unique_ptr<nn::Conv3d<T>>> down_, up_, fuse_;
    std::vector<std::unique_ptr<nn::ReLU<T>>> relu_d_, relu_u_, relu_f_;
    std::vector<std::unique_ptr<nn::Irb<T>>> irb_d_, irb_u_;
    std::vector<Tensor<T>> acts_;  // contracting-path activations (skips)
};

template <class T>
const std::vector<int> AbuModel<T>::kAbuKernels = {1, 3};

// Distortion between a target block tensor and the model output;
// focal loss for geometry, omega-weighted colour mix in joint mode. Gradients
// (optional) accumulate into the model parameters.
template <class T>
T abu_distortion(AbuModel<T>& model, const Tensor<T>& input, const Tensor<T>& target,
                 const TrainConfig& cfg, bool grads) {
    Tensor<T> out = model.forward(input);
    Tensor<T> u = slice_channels(target, 0, 1);
    Tensor<T> v = slice_channels(out, 0, 1);
    Tensor<T> dv_geo;
    T d_geo =
        nn::focal_loss(u, v, T(cfg.alpha), T(cfg.gamma), grads ? &dv_geo : nullptr);
    T d_col = T(0);
    Tensor<T> dout_col;
    bool joint = target.shape[1] == 4;
    if (joint) d_col = nn::color_mse(target, out, grads ? &dout_col : nullptr);
    T dist = joint ? nn::total_distortion(d_geo, d_col, T(cfg.omega)) : d_geo;
    if (!grads) return dist;

    Tensor<T> dout(out.shape);
    T geo_w = joint ? T(1) - T(cfg.omega) : T(1);
    for (int d = 0; d < out.shape[2]; ++d)
        for (int h = 0; h < out.shape[3]; ++h)
            for (int w = 0; w < out.shape[4]; ++w)
                dout(0, 0, d, h, w) = geo_w * dv_geo(0, 0, d, h, w);
    if (joint)
        for (size_t i = 0; i < dout.data.size(); ++i)
            dout.data[i] += T(cfg.omega) * dout_col.data[i];
    model.backward(dout);
    return dist;
}

struct AbuPair {
    VoxelBlock input;   // basic up-sampled rendering of the down-sampled block
    VoxelBlock target;  // original block
};

// Distortion-only training; batch 1 for sf=2 and 8 for sf=4 unless
// overridden, patience-based early stopping on the validation pairs
// (training pairs reused when none given).
inline TrainResult train_abu(AbuModel<float>& model, const std::vector<AbuPair>& pairs,
                             const std::vector<AbuPair>& val_pairs, int sf,
                             TrainConfig cfg) {
    if (sf < 2) throw std::invalid_argument("train_abu: sampling factor must be >= 2");
    if (pairs.empty()) throw std::invalid_argument("train_abu: empty dataset");
    cfg.batch = sf == 2 ? 1 : 8;

    std::vector<std::pair<Tensor<float>, Tensor<float>>> xs, vs;
    for (const auto& p : pairs)
        xs.emplace_back(block_to_tensor<float>(p.input),
                        block_to_tensor<float>(p.target));
    for (const auto& p : val_pairs)
        vs.emplace_back(block_to_tensor<float>(p.input),
                        block_to_tensor<float>(p.target));
    if (vs.empty()) vs = xs;

    auto params = model.params();
    nn::Adam<float> opt(params, float(cfg.lr));
    Rng shuffle_rng(cfg.seed);

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
            for (size_t i = start; i < end; ++i)
                epoch_loss += abu_distortion(model, xs[order[i]].first,
                                             xs[order[i]].second, cfg, true);
            float inv = 1.0f / float(end - start);
            for (auto* p : params) p->grad.scale(inv);
            opt.step();
        }
        epoch_loss /= double(xs.size());
        if (epoch == 0) res.initial_train_loss = epoch_loss;
        res.final_train_loss = epoch_loss;

        double val = 0;
        for (auto& [in, tg] : vs) val += abu_distortion(model, in, tg, cfg, false);
        val /= double(vs.size());
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
