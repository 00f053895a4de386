// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "fd_oracle.hpp"
#include "loss_oracle.hpp"
#include "rdshift/diifi.hpp"
#include "rdshift/losses.hpp"

using namespace rdshift;
using namespace rdshift::testing;

namespace {

std::vector<Var<double>> random_list(std::mt19937_64& rng, int levels, int channels, int size) {
    std::vector<Var<double>> out;
    for (int k = 0; k < levels; ++k) out.emplace_back(random_tensor({2, channels << k, size >> k, size >> k}, rng));
    return out;
}

}  // namespace

TEST(FilterChain, ShapeLawExample) {
    ParamStore<float> store;
    Initializer init(1);
    FilterChain<float> chain(16, 3, store, init);
    const auto out = chain.transform(Var<float>(Tensor<float>({1, 16, 16, 16}, 0.25f)));
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].shape(), (Shape{1, 32, 8, 8}));
    EXPECT_EQ(out[1].shape(), (Shape{1, 64, 4, 4}));
}

TEST(FilterChain, ShapeLawHoldsForRandomConfigs) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const int K = 2 + static_cast<int>(rng() % 3);
        const int C = 1 + static_cast<int>(rng() % 4);
        const int unit = 1 << (K - 1);
        const int H = unit * (1 + static_cast<int>(rng() % 3));
        const int W = unit * (1 + static_cast<int>(rng() % 3));
        ParamStore<float> store;
        Initializer init(trial);
        FilterChain<float> chain(C, K, store, init);
        const auto out = chain.transform(Var<float>(Tensor<float>({1, C, H, W}, 0.5f)));
        ASSERT_EQ(static_cast<int>(out.size()), K - 1);
        for (int k = 2; k <= K; ++k)
            ASSERT_EQ(out[k - 2].shape(), (Shape{1, C << (k - 1), H >> (k - 1), W >> (k - 1)}))
                << "C=" << C << " H=" << H << " W=" << W << " K=" << K;
    }
}

TEST(FilterChain, ZeroBaseGivesZeroOutputs) {
    ParamStore<float> store;
    Initializer init(3);
    FilterChain<float> chain(4, 3, store, init);
    for (const auto& o : chain.transform(Var<float>(Tensor<float>({2, 4, 8, 8}))))
        for (float v : o.value().values()) ASSERT_EQ(v, 0.0f);
}

TEST(FilterChain, RejectsIndivisibleAndWrongChannels) {
    ParamStore<float> store;
    Initializer init(4);
    FilterChain<float> chain(4, 3, store, init);
    EXPECT_THROW(chain.transform(Var<float>(Tensor<float>({1, 4, 6, 8}))), ShapeError);
    EXPECT_THROW(chain.transform(Var<float>(Tensor<float>({1, 3, 8, 8}))), ShapeError);
    EXPECT_THROW(FilterChain<float>(4, 1, store, init), ValidationError);
}

TEST(FilterChain, GradientMatchesFiniteDifferences) {
    ParamStore<double> store;
    Initializer init(5);
    FilterChain<double> chain(2, 3, store, init);
    std::mt19937_64 rng(6);
    Var<double> base(random_tensor({2, 2, 8, 8}, rng), true);
    const auto shapes = chain.transform(base);
    const Tensor<double> w2 = random_tensor(shapes[0].shape(), rng);
    const Tensor<double> w3 = random_tensor(shapes[1].shape(), rng);
    auto f = [&] {
        const auto out = chain.transform(base);
        return ops::add(dot_probe(out[0], w2), dot_probe(out[1], w3));
    };
    std::vector<Var<double>> inputs{base};
    for (const auto& [name, v] : store.items()) inputs.push_back(v);
    EXPECT_LT(max_fd_error(f, inputs, 1e-5, 1e-6), 1e-4);
}

TEST(LossMse, ZeroConstantAndOracle) {
    std::mt19937_64 rng(7);
    const auto a = random_list(rng, 2, 2, 4);
    EXPECT_EQ(loss_mse(a, a, {a, a}, {a, a}).item(), 0.0);

    Var<double> x(Tensor<double>({1, 2, 3, 3}, 1.0)), y(Tensor<double>({1, 2, 3, 3}, 1.75));
    EXPECT_NEAR(loss_mse<double>({x}, {y}, {}, {}).item(), 0.5625, 1e-15);

    const auto b = random_list(rng, 2, 2, 4);
    const std::vector<std::vector<Var<double>>> va{random_list(rng, 2, 2, 4), random_list(rng, 2, 2, 4)};
    const std::vector<std::vector<Var<double>>> vb{random_list(rng, 2, 2, 4), random_list(rng, 2, 2, 4)};
    double expected = 0;
    for (int k = 0; k < 2; ++k) {
        expected += oracle_mse(a[k].value(), b[k].value());
        for (int n = 0; n < 2; ++n) expected += oracle_mse(va[n][k].value(), vb[n][k].value());
    }
    EXPECT_NEAR(loss_mse(a, b, va, vb).item(), expected, 1e-6);
    EXPECT_NEAR(loss_mse(a, b, va, vb).item(), loss_mse(b, a, vb, va).item(), 1e-12);
}

TEST(LossMse, RejectsMismatch) {
    std::mt19937_64 rng(8);
    const auto a = random_list(rng, 2, 2, 4);
    const auto b = random_list(rng, 1, 2, 4);
    EXPECT_THROW(loss_mse(a, b, {}, {}), ShapeError);
    EXPECT_THROW(loss_mse(a, a, {a}, {}), ShapeError);
    EXPECT_THROW(loss_mse<double>({a[0]}, {a[1]}, {}, {}), ShapeError);
}

TEST(LossNor, IdentityOrthogonalAntiparallel) {
    std::mt19937_64 rng(9);
    Var<double> x(random_tensor({1, 2, 2, 2}, rng));
    EXPECT_NEAR(loss_nor(x, {x, x}).item(), 0.0, 1e-12);
    EXPECT_NEAR(loss_nor(x, {ops::scale(x, -1.0)}).item(), 2.0, 1e-12);

    Tensor<double> a({1, 2, 2, 2}), b({1, 2, 2, 2});
    a[0] = 1.0;
    a[3] = -2.0;
    b[1] = 4.0;
    b[5] = 0.5;
    EXPECT_NEAR(loss_nor(Var<double>(a), {Var<double>(b)}).item(), 1.0, 1e-15);
    EXPECT_THROW(loss_nor(x, {}), ValidationError);
    EXPECT_THROW(loss_nor(x, {Var<double>(Tensor<double>({1, 2, 2, 1}))}), ShapeError);
}

TEST(LossFi, LinearInEachComponent) {
    const double beta = 0.02, gamma = 1.0;
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int i = 0; i < 100; ++i) {
        const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
        const double base = loss_fi(a, b, c, beta, gamma);
        EXPECT_NEAR(loss_fi(a + d, b, c, beta, gamma) - base, d, 1e-12);
        EXPECT_NEAR(loss_fi(a, b + d, c, beta, gamma) - base, beta * d, 1e-12);
        EXPECT_NEAR(loss_fi(a, b, c + d, beta, gamma) - base, gamma * d, 1e-12);
    }
}
