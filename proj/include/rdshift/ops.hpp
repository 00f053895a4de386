// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "rdshift/autograd.hpp"

// Differentiable tensor operations. Feature maps are NCHW; every op records
// its backward only when at least one input requires a gradient.
namespace rdshift::ops {

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T s);

// Weighted sum of scalar (single element) variables.
template <typename T> Var<T> weighted_sum(const std::vector<Var<T>>& xs, const std::vector<T>& ws);

// x: N x Ci x H x W, w: Co x Ci x k x k, b: Co (may be undefined).
template <typename T> Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad);

// Per-sample attention-weighted kernel aggregation followed by convolution.
// attn: N x P (rows sum to 1), w: P x Co x Ci x k x k, b: P x Co.
template <typename T>
Var<T> dynamic_conv2d(const Var<T>& x, const Var<T>& attn, const Var<T>& w, const Var<T>& b, int stride, int pad);

// x: N x F, w: O x F, b: O.
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);

template <typename T> Var<T> relu(const Var<T>& x);
template <typename T> Var<T> leaky_relu(const Var<T>& x, T slope);
template <typename T> Var<T> softmax_rows(const Var<T>& x);
template <typename T> Var<T> global_avg_pool(const Var<T>& x);  // N x C x H x W -> N x C

// Per-sample, per-channel normalization without affine parameters.
template <typename T> Var<T> instance_norm(const Var<T>& x, T eps);
// Training-mode batch normalization over (N, H, W) with affine gamma/beta of length C.
template <typename T> Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps);

template <typename T> Var<T> max_pool2(const Var<T>& x);
template <typename T> Var<T> upsample_nearest2(const Var<T>& x);
template <typename T> Var<T> concat_channels(const std::vector<Var<T>>& xs);

// Mean over samples and spatial locations of 1 - cos(channel vectors).
template <typename T> Var<T> cosine_distance_per_location(const Var<T>& a, const Var<T>& b);
// Mean over samples of 1 - cos(flattened per-sample tensors).
template <typename T> Var<T> cosine_distance_flat(const Var<T>& a, const Var<T>& b);
// Mean squared error over all elements.
template <typename T> Var<T> mse(const Var<T>& a, const Var<T>& b);
// Mean softmax cross-entropy. logits: N x classes.
template <typename T> Var<T> cross_entropy(const Var<T>& logits, const std::vector<int>& labels);

// Guard added to every cosine denominator.
inline constexpr double kCosineEps = 1e-8;

}  // namespace rdshift::ops
