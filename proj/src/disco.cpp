// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "rdshift/disco.hpp"

#include <algorithm>

namespace rdshift {

template <typename T>
DynamicConv<T> DynamicConv<T>::create(ParamStore<T>& store, const std::string& name, int channels, int num_kernels,
                                      int ratio, bool zero_kernels, Initializer& init) {
    DynamicConv d;
    const int fan_in = channels * 9;
    d.kernels = store.add(name + ".kernels", zero_kernels ? Tensor<T>({num_kernels, channels, channels, 3, 3})
                                                          : init.kaiming<T>({num_kernels, channels, channels, 3, 3}, fan_in));
    d.biases = store.add(name + ".biases", zero_kernels ? Tensor<T>({num_kernels, channels})
                                                        : init.uniform<T>({num_kernels, channels}, 1.0 / std::sqrt(fan_in)));
    const int hidden = std::max(channels / ratio, 4);
    d.fc1_w = store.add(name + ".attn.fc1.weight", init.kaiming<T>({hidden, channels}, channels));
    d.fc1_b = store.add(name + ".attn.fc1.bias", Tensor<T>({hidden}));
    d.fc2_w = store.add(name + ".attn.fc2.weight", init.kaiming<T>({num_kernels, hidden}, hidden));
    d.fc2_b = store.add(name + ".attn.fc2.bias", Tensor<T>({num_kernels}));
    return d;
}

template <typename T>
Var<T> DynamicConv<T>::attention(const Var<T>& x) const {
    Var<T> h = ops::relu(ops::linear(ops::global_avg_pool(x), fc1_w, fc1_b));
    return ops::softmax_rows(ops::linear(h, fc2_w, fc2_b));
}

template <typename T>
Var<T> DynamicConv<T>::operator()(const Var<T>& x) const {
    return ops::dynamic_conv2d(x, attention(x), kernels, biases, 1, 1);
}

template <typename T>
CompensationModule<T>::CompensationModule(const ModelConfig& cfg, int level, ParamStore<T>& store, Initializer& init)
    : channels_(cfg.channels(level)) {
    for (int m = 1; m <= cfg.disco_blocks; ++m) {
        const bool last = m == cfg.disco_blocks;
        blocks_.push_back(DynamicConv<T>::create(
            store, "disco.k" + std::to_string(level) + ".block" + std::to_string(m), channels_, cfg.dyconv_kernels,
            cfg.attention_ratio, last && cfg.zero_init_compensation, init));
    }
}

template <typename T>
Var<T> CompensationModule<T>::operator()(const Var<T>& x) const {
    if (x.shape().size() != 4 || x.dim(1) != channels_)
        throw ShapeError("compensation module expects " + std::to_string(channels_) + " channels, got " +
                         shape_str(x.shape()));
    Var<T> h = x;
    for (const auto& block : blocks_)
        h = ops::leaky_relu(ops::instance_norm(block(h), T(kInstanceNormEps)), T(kLeakySlope));
    return h;
}

template <typename T>
DiscoStack<T>::DiscoStack(const ModelConfig& cfg, ParamStore<T>& store, Initializer& init) {
    for (int k = 1; k <= cfg.levels; ++k) modules_.emplace_back(cfg, k, store, init);
}

template <typename T>
const CompensationModule<T>& DiscoStack<T>::checked(int k) const {
    if (k < 1 || k > levels())
        throw ValidationError("compensation level " + std::to_string(k) + " out of range 1.." +
                              std::to_string(levels()));
    return modules_[static_cast<std::size_t>(k - 1)];
}

template <typename T>
Var<T> DiscoStack<T>::signal(const Var<T>& level_feat, int k) const {
    return checked(k)(level_feat);
}

template <typename T>
Var<T> DiscoStack<T>::compensate(const Var<T>& level_feat, int k) const {
    return ops::add(signal(level_feat, k), level_feat);
}

template <typename T>
FeaturePyramid<T> DiscoStack<T>::compensate(const FeaturePyramid<T>& student) const {
    if (static_cast<int>(student.size()) != levels())
        throw ShapeError("compensate: pyramid has " + std::to_string(student.size()) + " levels, expected " +
                         std::to_string(levels()));
    FeaturePyramid<T> out;
    for (int k = 1; k <= levels(); ++k) out.levels.push_back(compensate(student.level(k), k));
    return out;
}

namespace {

template <typename T>
void require_paired(const FeaturePyramid<T>& a, const FeaturePyramid<T>& b, const char* what) {
    if (a.size() != b.size() || a.size() == 0) throw ShapeError(std::string(what) + ": pyramid level count mismatch");
    for (std::size_t k = 0; k < a.size(); ++k) require_same_shape(a.levels[k].shape(), b.levels[k].shape(), what);
}

}  // namespace

template <typename T>
Var<T> loss_co(const FeaturePyramid<T>& teacher_orig, const std::vector<FeaturePyramid<T>>& teacher_views,
               const FeaturePyramid<T>& comp_orig, const std::vector<FeaturePyramid<T>>& comp_views, double alpha) {
    if (teacher_views.empty()) throw ValidationError("loss_co: at least one augmented view is required");
    if (teacher_views.size() != comp_views.size())
        throw ValidationError("loss_co: " + std::to_string(teacher_views.size()) + " teacher views but " +
                              std::to_string(comp_views.size()) + " compensated views");
    if (!(alpha >= 0.0)) throw ValidationError("loss_co: alpha must be >= 0");
    require_paired(teacher_orig, comp_orig, "loss_co");
    std::vector<Var<T>> terms;
    std::vector<T> weights;
    for (std::size_t k = 0; k < teacher_orig.size(); ++k) {
        terms.push_back(cosine_per_location(teacher_orig.levels[k], comp_orig.levels[k]));
        weights.push_back(T(1));
    }
    for (std::size_t n = 0; n < teacher_views.size(); ++n) {
        require_paired(teacher_orig, teacher_views[n], "loss_co");
        require_paired(teacher_views[n], comp_views[n], "loss_co");
        for (std::size_t k = 0; k < teacher_orig.size(); ++k) {
            terms.push_back(cosine_per_location(teacher_views[n].levels[k], comp_views[n].levels[k]));
            weights.push_back(T(alpha));
        }
    }
    return ops::weighted_sum(terms, weights);
}

template struct DynamicConv<float>;
template struct DynamicConv<double>;
template class CompensationModule<float>;
template class CompensationModule<double>;
template class DiscoStack<float>;
template class DiscoStack<double>;
template Var<float> loss_co(const FeaturePyramid<float>&, const std::vector<FeaturePyramid<float>>&,
                            const FeaturePyramid<float>&, const std::vector<FeaturePyramid<float>>&, double);
template Var<double> loss_co(const FeaturePyramid<double>&, const std::vector<FeaturePyramid<double>>&,
                             const FeaturePyramid<double>&, const std::vector<FeaturePyramid<double>>&, double);

}  // namespace rdshift
