// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "rdshift/losses.hpp"
#include "rdshift/model.hpp"

namespace rdshift {

inline constexpr double kInstanceNormEps = 1e-5;
inline constexpr double kLeakySlope = 0.01;

// 3x3 convolution whose kernel is a per-sample softmax mixture of P kernels.
// Attention: global average pool -> linear -> relu -> linear -> softmax.
template <typename T>
struct DynamicConv {
    Var<T> kernels, biases;  // P x C x C x 3 x 3, P x C
    Var<T> fc1_w, fc1_b, fc2_w, fc2_b;

    static DynamicConv create(ParamStore<T>& store, const std::string& name, int channels, int num_kernels,
                              int ratio, bool zero_kernels, Initializer& init);
    Var<T> attention(const Var<T>& x) const;  // N x P, rows sum to one
    Var<T> operator()(const Var<T>& x) const;
};

// C_k: M blocks of (dynamic conv, instance norm, leaky relu). Shape preserving.
template <typename T>
class CompensationModule {
public:
    CompensationModule(const ModelConfig& cfg, int level, ParamStore<T>& store, Initializer& init);
    Var<T> operator()(const Var<T>& x) const;
    const std::vector<DynamicConv<T>>& blocks() const { return blocks_; }

private:
    int channels_;
    std::vector<DynamicConv<T>> blocks_;
};

// One compensation module per pyramid level.
template <typename T>
class DiscoStack {
public:
    DiscoStack(const ModelConfig& cfg, ParamStore<T>& store, Initializer& init);

    int levels() const { return static_cast<int>(modules_.size()); }
    // C_k(f); k is 1-based.
    Var<T> signal(const Var<T>& level_feat, int k) const;
    // f + C_k(f).
    Var<T> compensate(const Var<T>& level_feat, int k) const;
    FeaturePyramid<T> compensate(const FeaturePyramid<T>& student) const;
    const CompensationModule<T>& module(int k) const { return modules_.at(static_cast<std::size_t>(k - 1)); }

private:
    const CompensationModule<T>& checked(int k) const;
    std::vector<CompensationModule<T>> modules_;
};

// Compensated-vs-teacher alignment on the original view plus alpha times the
// same quantity summed over augmented views.
template <typename T>
Var<T> loss_co(const FeaturePyramid<T>& teacher_orig, const std::vector<FeaturePyramid<T>>& teacher_views,
               const FeaturePyramid<T>& comp_orig, const std::vector<FeaturePyramid<T>>& comp_views, double alpha);

}  // namespace rdshift
