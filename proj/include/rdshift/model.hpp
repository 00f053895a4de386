// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rdshift/ops.hpp"

namespace rdshift {

struct ModelConfig {
    int base_channels = 16;  // level-1 channel count
    int levels = 3;          // pyramid depth K
    int image_size = 64;
    int disco_blocks = 4;    // M
    int dyconv_kernels = 4;  // P
    int attention_ratio = 4;
    int aux_classes = 4;
    // Zero-initializes the last dynamic convolution of each compensation module.
    bool zero_init_compensation = true;

    int channels(int level) const { return base_channels << (level - 1); }  // level is 1-based
    int spatial(int level) const { return image_size / (4 << (level - 1)); }
    Shape level_shape(int batch, int level) const {
        return {batch, channels(level), spatial(level), spatial(level)};
    }
    void validate() const;
};

// Ordered feature maps; levels[0] is the finest (level 1).
template <typename T>
struct FeaturePyramid {
    std::vector<Var<T>> levels;

    std::size_t size() const { return levels.size(); }
    const Var<T>& level(int k) const { return levels.at(static_cast<std::size_t>(k - 1)); }
    bool all_finite() const;
    // Throws ShapeError unless channels double and spatial dims halve per level.
    void check_shape_law(std::size_t expected_levels) const;
    FeaturePyramid detached() const;
};

// Named parameters in registration order. Registration order defines the
// checkpoint layout.
template <typename T>
class ParamStore {
public:
    Var<T> add(const std::string& name, Tensor<T> init, bool trainable = true);
    const std::vector<std::pair<std::string, Var<T>>>& items() const { return items_; }
    std::vector<Var<T>> trainable() const;
    Var<T> find(const std::string& name) const;
    void set_trainable(const std::string& prefix, bool trainable);
    std::size_t scalar_count() const;

private:
    std::vector<std::pair<std::string, Var<T>>> items_;
};

// Deterministic initializers. Sampling happens in double so float and double
// builds of the same seed start from the same weights.
class Initializer {
public:
    explicit Initializer(std::uint64_t seed) : rng_(seed) {}
    template <typename T>
    Tensor<T> uniform(Shape shape, double bound);
    template <typename T>
    Tensor<T> kaiming(Shape shape, int fan_in) { return uniform<T>(std::move(shape), std::sqrt(6.0 / fan_in)); }

private:
    std::mt19937_64 rng_;
};

template <typename T>
struct Conv {
    Var<T> weight, bias;
    int stride = 1, pad = 1;

    static Conv create(ParamStore<T>& store, const std::string& name, int in, int out, int kernel, int stride,
                       Initializer& init);
    Var<T> operator()(const Var<T>& x) const { return ops::conv2d(x, weight, bias, stride, pad); }
};

// relu(conv(relu(conv(x))) + shortcut(x)); the shortcut is a 1x1 projection
// when channels or stride change.
template <typename T>
struct ResBlock {
    Conv<T> conv1, conv2;
    bool project = false;
    Conv<T> shortcut;

    static ResBlock create(ParamStore<T>& store, const std::string& name, int in, int out, int stride,
                           Initializer& init);
    Var<T> operator()(const Var<T>& x) const;
};

// Frozen encoder: stride-2 conv + 2x2 max pool stem, then K residual stages.
template <typename T>
class TeacherNet {
public:
    TeacherNet(const ModelConfig& cfg, ParamStore<T>& store, Initializer& init);

    FeaturePyramid<T> encode(const Var<T>& images) const;
    // Re-runs stages 2..K from a (possibly adapted) level-1 map.
    FeaturePyramid<T> encode_from_level1(const Var<T>& level1) const;
    Var<T> classify(const FeaturePyramid<T>& pyramid) const;  // auxiliary head logits

    void freeze(ParamStore<T>& store) const { store.set_trainable("teacher.", false); }

private:
    ModelConfig cfg_;
    Conv<T> stem_;
    std::vector<ResBlock<T>> stages_;
    Var<T> head_w_, head_b_;
};

// One-class bottleneck: every level is brought to level-K resolution with
// stride-2 convolutions, concatenated, and projected by one residual block.
template <typename T>
class Bottleneck {
public:
    Bottleneck(const ModelConfig& cfg, ParamStore<T>& store, Initializer& init);
    Var<T> operator()(const FeaturePyramid<T>& pyramid) const;

private:
    ModelConfig cfg_;
    std::vector<std::vector<Conv<T>>> down_;  // per level 1..K-1
    ResBlock<T> project_;
};

// Mirrors the teacher: nearest x2 upsampling followed by a residual block per stage.
template <typename T>
class StudentNet {
public:
    StudentNet(const ModelConfig& cfg, ParamStore<T>& store, Initializer& init);
    FeaturePyramid<T> decode(const Var<T>& embedding) const;

private:
    ModelConfig cfg_;
    std::vector<ResBlock<T>> stages_;  // stages_[k-1] emits level k
};

}  // namespace rdshift
