// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "fd_oracle.hpp"
#include "rdshift/ops.hpp"

using namespace rdshift;
using rdshift::testing::max_fd_error;
using rdshift::testing::random_tensor;

namespace {

constexpr double kTol = 1e-5;

struct OpsTest : ::testing::Test {
    std::mt19937_64 rng{42};
    Var<double> param(Shape s) { return Var<double>(random_tensor(std::move(s), rng), true); }
};

}  // namespace

TEST_F(OpsTest, ConvMatchesDirectLoop) {
    struct Geo { int h, w, k, stride, pad; };
    for (const Geo geo : {Geo{5, 6, 3, 2, 1}, Geo{5, 6, 3, 1, 1}, Geo{4, 7, 3, 1, 0}, Geo{6, 5, 1, 1, 0},
                          Geo{7, 7, 3, 2, 0}, Geo{3, 4, 3, 1, 2}, Geo{8, 8, 1, 2, 0}}) {
        auto x = param({2, 3, geo.h, geo.w});
        auto w = param({4, 3, geo.k, geo.k});
        auto b = param({4});
        auto y = ops::conv2d(x, w, b, geo.stride, geo.pad);
        const int ho = (geo.h + 2 * geo.pad - geo.k) / geo.stride + 1;
        const int wo = (geo.w + 2 * geo.pad - geo.k) / geo.stride + 1;
        ASSERT_EQ(y.shape(), (Shape{2, 4, ho, wo}));
        for (int n = 0; n < 2; ++n)
            for (int co = 0; co < 4; ++co)
                for (int oh = 0; oh < ho; ++oh)
                    for (int ow = 0; ow < wo; ++ow) {
                        double acc = b.value()[co];
                        for (int ci = 0; ci < 3; ++ci)
                            for (int kh = 0; kh < geo.k; ++kh)
                                for (int kw = 0; kw < geo.k; ++kw) {
                                    const int ih = oh * geo.stride - geo.pad + kh, iw = ow * geo.stride - geo.pad + kw;
                                    if (ih < 0 || ih >= geo.h || iw < 0 || iw >= geo.w) continue;
                                    acc += w.value().at(co, ci, kh, kw) * x.value().at(n, ci, ih, iw);
                                }
                        EXPECT_NEAR(y.value().at(n, co, oh, ow), acc, 1e-12);
                    }
        const auto target = Var<double>(random_tensor(y.shape(), rng));
        EXPECT_LT(max_fd_error([&] { return ops::mse(ops::conv2d(x, w, b, geo.stride, geo.pad), target); }, {x, w, b}),
                  kTol);
    }
}

TEST_F(OpsTest, ConvGradient) {
    auto x = param({2, 3, 5, 5});
    auto w = param({4, 3, 3, 3});
    auto b = param({4});
    const auto target = Var<double>(random_tensor({2, 4, 3, 3}, rng));
    auto f = [&] { return ops::mse(ops::conv2d(x, w, b, 2, 1), target); };
    EXPECT_LT(max_fd_error(f, {x, w, b}), kTol);
}

TEST_F(OpsTest, DynamicConvGradient) {
    auto x = param({2, 3, 4, 4});
    auto logits = param({2, 4});
    auto w = param({4, 2, 3, 3, 3});
    auto b = param({4, 2});
    const auto target = Var<double>(random_tensor({2, 2, 4, 4}, rng));
    auto f = [&] { return ops::mse(ops::dynamic_conv2d(x, ops::softmax_rows(logits), w, b, 1, 1), target); };
    EXPECT_LT(max_fd_error(f, {x, logits, w, b}), kTol);
}

TEST_F(OpsTest, DynamicConvWithUniformAttentionIsMeanKernelConv) {
    auto x = param({1, 2, 5, 5});
    auto w = param({4, 3, 2, 3, 3});
    auto b = param({4, 3});
    Tensor<double> mean_w({3, 2, 3, 3});
    Tensor<double> mean_b({3});
    for (int p = 0; p < 4; ++p) {
        for (std::size_t i = 0; i < mean_w.numel(); ++i) mean_w[i] += w.value()[p * mean_w.numel() + i] / 4;
        for (int c = 0; c < 3; ++c) mean_b[c] += b.value()[p * 3 + c] / 4;
    }
    auto attn = ops::softmax_rows(Var<double>(Tensor<double>({1, 4}, 0.3)));
    auto dyn = ops::dynamic_conv2d(x, attn, w, b, 1, 1);
    auto stat = ops::conv2d(x, Var<double>(mean_w), Var<double>(mean_b), 1, 1);
    for (std::size_t i = 0; i < dyn.numel(); ++i) EXPECT_NEAR(dyn.value()[i], stat.value()[i], 1e-12);
}

TEST_F(OpsTest, NormalizationGradients) {
    auto x = param({3, 2, 3, 3});
    auto gamma = param({2});
    auto beta = param({2});
    const auto target = Var<double>(random_tensor({3, 2, 3, 3}, rng));
    EXPECT_LT(max_fd_error([&] { return ops::mse(ops::instance_norm(x, 1e-5), target); }, {x}), kTol);
    EXPECT_LT(max_fd_error([&] { return ops::mse(ops::batch_norm(x, gamma, beta, 1e-5), target); }, {x, gamma, beta}),
              kTol);
}

TEST_F(OpsTest, InstanceNormZeroMeanUnitVariance) {
    auto x = param({2, 3, 4, 4});
    auto y = ops::instance_norm(x, 0.0);
    for (int i = 0; i < 6; ++i) {
        double m = 0, v = 0;
        for (int j = 0; j < 16; ++j) m += y.value()[i * 16 + j] / 16;
        for (int j = 0; j < 16; ++j) v += (y.value()[i * 16 + j] - m) * (y.value()[i * 16 + j] - m) / 16;
        EXPECT_NEAR(m, 0.0, 1e-12);
        EXPECT_NEAR(v, 1.0, 1e-9);
    }
}

TEST_F(OpsTest, ShapeOpsGradients) {
    auto x = param({2, 3, 4, 4});
    auto y = param({2, 1, 4, 4});
    const auto t1 = Var<double>(random_tensor({2, 4, 4, 4}, rng));
    EXPECT_LT(max_fd_error([&] { return ops::mse(ops::concat_channels<double>({x, y}), t1); }, {x, y}), kTol);
    const auto t2 = Var<double>(random_tensor({2, 3, 8, 8}, rng));
    EXPECT_LT(max_fd_error([&] { return ops::mse(ops::upsample_nearest2(x), t2); }, {x}), kTol);
    const auto t3 = Var<double>(random_tensor({2, 3, 2, 2}, rng));
    EXPECT_LT(max_fd_error([&] { return ops::mse(ops::max_pool2(x), t3); }, {x}), kTol);
    const auto t4 = Var<double>(random_tensor({2, 3}, rng));
    EXPECT_LT(max_fd_error([&] { return ops::mse(ops::global_avg_pool(x), t4); }, {x}), kTol);
}

TEST_F(OpsTest, ActivationAndLinearGradients) {
    auto x = param({3, 5});
    auto w = param({4, 5});
    auto b = param({4});
    const auto t = Var<double>(random_tensor({3, 4}, rng));
    EXPECT_LT(max_fd_error([&] { return ops::mse(ops::leaky_relu(ops::linear(x, w, b), 0.01), t); }, {x, w, b}),
              kTol);
    EXPECT_LT(max_fd_error([&] { return ops::cross_entropy(ops::linear(x, w, b), {0, 3, 1}); }, {x, w, b}), kTol);
}

TEST_F(OpsTest, CosineGradients) {
    auto a = param({2, 3, 2, 3});
    auto b = param({2, 3, 2, 3});
    EXPECT_LT(max_fd_error([&] { return ops::cosine_distance_per_location(a, b); }, {a, b}), kTol);
    EXPECT_LT(max_fd_error([&] { return ops::cosine_distance_flat(a, b); }, {a, b}), kTol);
}

TEST_F(OpsTest, CosineOfZeroVectorIsOne) {
    Var<double> z(Tensor<double>({1, 2, 1, 1}));
    Var<double> a(Tensor<double>({1, 2, 1, 1}, 1.0));
    EXPECT_DOUBLE_EQ(ops::cosine_distance_per_location(z, a).item(), 1.0);
    EXPECT_DOUBLE_EQ(ops::cosine_distance_flat(z, z).item(), 1.0);
}

TEST_F(OpsTest, WeightedSumAndScale) {
    auto a = param({1});
    auto b = param({1});
    auto f = [&] { return ops::scale(ops::weighted_sum<double>({a, b}, {2.0, -0.5}), 3.0); };
    EXPECT_NEAR(f().item(), 3.0 * (2.0 * a.item() - 0.5 * b.item()), 1e-15);
    EXPECT_LT(max_fd_error(f, {a, b}), kTol);
}

TEST_F(OpsTest, MismatchedShapesThrow) {
    auto a = param({1, 2, 3, 3});
    auto b = param({1, 2, 3, 2});
    EXPECT_THROW(ops::add(a, b), ShapeError);
    EXPECT_THROW(ops::mse(a, b), ShapeError);
    EXPECT_THROW(ops::conv2d(a, param({4, 3, 3, 3}), Var<double>(), 1, 1), ShapeError);
}

TEST_F(OpsTest, ConstantsRecordNoGraph) {
    Var<double> a(random_tensor({1, 2, 2, 2}, rng));
    auto y = ops::relu(a);
    EXPECT_FALSE(y.requires_grad());
    EXPECT_TRUE(y.node()->parents.empty());
}
