// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "rdshift/model.hpp"

namespace rdshift {

void ModelConfig::validate() const {
    if (base_channels < 1) throw ValidationError("base_channels must be >= 1");
    if (levels < 1) throw ValidationError("levels must be >= 1");
    if (disco_blocks < 1) throw ValidationError("disco_blocks must be >= 1");
    if (dyconv_kernels < 1) throw ValidationError("dyconv_kernels must be >= 1");
    if (attention_ratio < 1) throw ValidationError("attention_ratio must be >= 1");
    if (aux_classes < 2) throw ValidationError("aux_classes must be >= 2");
    const int divisor = 1 << (levels + 1);
    if (image_size <= 0 || image_size % divisor != 0)
        throw ShapeError("image_size " + std::to_string(image_size) + " must be divisible by " +
                         std::to_string(divisor));
}

template <typename T>
bool FeaturePyramid<T>::all_finite() const {
    for (const auto& l : levels)
        if (!l.value().all_finite()) return false;
    return true;
}

template <typename T>
void FeaturePyramid<T>::check_shape_law(std::size_t expected_levels) const {
    if (levels.size() != expected_levels)
        throw ShapeError("pyramid has " + std::to_string(levels.size()) + " levels, expected " +
                         std::to_string(expected_levels));
    for (std::size_t k = 0; k < levels.size(); ++k) {
        const Shape& s = levels[k].shape();
        if (s.size() != 4) throw ShapeError("pyramid level must be NCHW, got " + shape_str(s));
        if (k == 0) continue;
        const Shape& p = levels[k - 1].shape();
        if (s[0] != p[0] || s[1] != 2 * p[1] || 2 * s[2] != p[2] || 2 * s[3] != p[3])
            throw ShapeError("pyramid level " + std::to_string(k + 1) + " " + shape_str(s) +
                             " breaks the shape law after " + shape_str(p));
    }
}

template <typename T>
FeaturePyramid<T> FeaturePyramid<T>::detached() const {
    FeaturePyramid out;
    for (const auto& l : levels) out.levels.push_back(l.detach());
    return out;
}

template <typename T>
Var<T> ParamStore<T>::add(const std::string& name, Tensor<T> init, bool trainable) {
    for (const auto& [n, _] : items_)
        if (n == name) throw ValidationError("duplicate parameter name " + name);
    Var<T> v(std::move(init), trainable);
    items_.emplace_back(name, v);
    return v;
}

template <typename T>
std::vector<Var<T>> ParamStore<T>::trainable() const {
    std::vector<Var<T>> out;
    for (const auto& [_, v] : items_)
        if (v.requires_grad()) out.push_back(v);
    return out;
}

template <typename T>
Var<T> ParamStore<T>::find(const std::string& name) const {
    for (const auto& [n, v] : items_)
        if (n == name) return v;
    throw ValidationError("unknown parameter " + name);
}

template <typename T>
void ParamStore<T>::set_trainable(const std::string& prefix, bool trainable) {
    for (auto& [n, v] : items_)
        if (n.rfind(prefix, 0) == 0) v.set_requires_grad(trainable);
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, v] : items_) n += v.numel();
    return n;
}

template <typename T>
Tensor<T> Initializer::uniform(Shape shape, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor<T> t(std::move(shape));
    for (auto& v : t.values()) v = static_cast<T>(dist(rng_));
    return t;
}

template <typename T>
Conv<T> Conv<T>::create(ParamStore<T>& store, const std::string& name, int in, int out, int kernel, int stride,
                        Initializer& init) {
    Conv c;
    const int fan_in = in * kernel * kernel;
    c.weight = store.add(name + ".weight", init.kaiming<T>({out, in, kernel, kernel}, fan_in));
    c.bias = store.add(name + ".bias", Tensor<T>({out}));
    c.stride = stride;
    c.pad = kernel / 2;
    return c;
}

template <typename T>
ResBlock<T> ResBlock<T>::create(ParamStore<T>& store, const std::string& name, int in, int out, int stride,
                                Initializer& init) {
    ResBlock b;
    b.conv1 = Conv<T>::create(store, name + ".conv1", in, out, 3, stride, init);
    b.conv2 = Conv<T>::create(store, name + ".conv2", out, out, 3, 1, init);
    b.project = in != out || stride != 1;
    if (b.project) b.shortcut = Conv<T>::create(store, name + ".shortcut", in, out, 1, stride, init);
    return b;
}

template <typename T>
Var<T> ResBlock<T>::operator()(const Var<T>& x) const {
    Var<T> h = conv2(ops::relu(conv1(x)));
    return ops::relu(ops::add(h, project ? shortcut(x) : x));
}

template <typename T>
TeacherNet<T>::TeacherNet(const ModelConfig& cfg, ParamStore<T>& store, Initializer& init) : cfg_(cfg) {
    cfg_.validate();
    stem_ = Conv<T>::create(store, "teacher.stem", 3, cfg.channels(1), 3, 2, init);
    for (int k = 1; k <= cfg.levels; ++k) {
        const int in = k == 1 ? cfg.channels(1) : cfg.channels(k - 1);
        stages_.push_back(ResBlock<T>::create(store, "teacher.stage" + std::to_string(k), in, cfg.channels(k),
                                              k == 1 ? 1 : 2, init));
    }
    const int feat = cfg.channels(cfg.levels);
    head_w_ = store.add("teacher.head.weight", init.kaiming<T>({cfg.aux_classes, feat}, feat));
    head_b_ = store.add("teacher.head.bias", Tensor<T>({cfg.aux_classes}));
}

template <typename T>
FeaturePyramid<T> TeacherNet<T>::encode(const Var<T>& images) const {
    const Shape& s = images.shape();
    if (s.size() != 4 || s[1] != 3) throw ShapeError("teacher expects N x 3 x H x W images, got " + shape_str(s));
    const int divisor = 1 << (cfg_.levels + 1);
    if (s[2] % divisor != 0 || s[3] % divisor != 0)
        throw ShapeError("image size " + shape_str(s) + " not divisible by " + std::to_string(divisor));
    Var<T> x = ops::max_pool2(ops::relu(stem_(images)));
    return encode_from_level1(stages_[0](x));
}

template <typename T>
FeaturePyramid<T> TeacherNet<T>::encode_from_level1(const Var<T>& level1) const {
    FeaturePyramid<T> out;
    out.levels.push_back(level1);
    for (std::size_t k = 1; k < stages_.size(); ++k) out.levels.push_back(stages_[k](out.levels.back()));
    return out;
}

template <typename T>
Var<T> TeacherNet<T>::classify(const FeaturePyramid<T>& pyramid) const {
    return ops::linear(ops::global_avg_pool(pyramid.levels.back()), head_w_, head_b_);
}

template <typename T>
Bottleneck<T>::Bottleneck(const ModelConfig& cfg, ParamStore<T>& store, Initializer& init) : cfg_(cfg) {
    const int K = cfg.levels;
    for (int k = 1; k < K; ++k) {
        std::vector<Conv<T>> chain;
        for (int j = k; j < K; ++j)
            chain.push_back(Conv<T>::create(store, "bottleneck.down" + std::to_string(k) + "." + std::to_string(j - k),
                                            cfg.channels(j), cfg.channels(j + 1), 3, 2, init));
        down_.push_back(std::move(chain));
    }
    project_ = ResBlock<T>::create(store, "bottleneck.project", K * cfg.channels(K), cfg.channels(K), 1, init);
}

template <typename T>
Var<T> Bottleneck<T>::operator()(const FeaturePyramid<T>& pyramid) const {
    pyramid.check_shape_law(static_cast<std::size_t>(cfg_.levels));
    std::vector<Var<T>> parts;
    for (std::size_t k = 0; k < down_.size(); ++k) {
        Var<T> x = pyramid.levels[k];
        for (const auto& conv : down_[k]) x = ops::relu(conv(x));
        parts.push_back(x);
    }
    parts.push_back(pyramid.levels.back());
    return project_(ops::concat_channels(parts));
}

template <typename T>
StudentNet<T>::StudentNet(const ModelConfig& cfg, ParamStore<T>& store, Initializer& init) : cfg_(cfg) {
    const int K = cfg.levels;
    for (int k = 1; k <= K; ++k) {
        const int in = k == K ? cfg.channels(K) : cfg.channels(k + 1);
        stages_.push_back(
            ResBlock<T>::create(store, "student.stage" + std::to_string(k), in, cfg.channels(k), 1, init));
    }
}

template <typename T>
FeaturePyramid<T> StudentNet<T>::decode(const Var<T>& embedding) const {
    const int K = cfg_.levels;
    const Shape& s = embedding.shape();
    if (s.size() != 4 || s[1] != cfg_.channels(K) || s[2] != cfg_.spatial(K) || s[3] != cfg_.spatial(K))
        throw ShapeError("student expects embedding " + shape_str(cfg_.level_shape(s.empty() ? 1 : s[0], K)) +
                         ", got " + shape_str(s));
    FeaturePyramid<T> out;
    out.levels.resize(static_cast<std::size_t>(K));
    Var<T> x = stages_[K - 1](embedding);
    out.levels[K - 1] = x;
    for (int k = K - 1; k >= 1; --k) {
        x = stages_[k - 1](ops::upsample_nearest2(x));
        out.levels[k - 1] = x;
    }
    return out;
}

template struct FeaturePyramid<float>;
template struct FeaturePyramid<double>;
template class ParamStore<float>;
template class ParamStore<double>;
template Tensor<float> Initializer::uniform<float>(Shape, double);
template Tensor<double> Initializer::uniform<double>(Shape, double);
template struct Conv<float>;
template struct Conv<double>;
template struct ResBlock<float>;
template struct ResBlock<double>;
template class TeacherNet<float>;
template class TeacherNet<double>;
template class Bottleneck<float>;
template class Bottleneck<double>;
template class StudentNet<float>;
template class StudentNet<double>;

}  // namespace rdshift
