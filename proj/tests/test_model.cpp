// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "fd_oracle.hpp"
#include "rdshift/model.hpp"

using namespace rdshift;
using rdshift::testing::random_tensor;

namespace {

template <typename T>
struct Core {
    ParamStore<T> store;
    Initializer init;
    TeacherNet<T> teacher;
    Bottleneck<T> bottleneck;
    StudentNet<T> student;
    explicit Core(const ModelConfig& cfg, std::uint64_t seed = 7)
        : init(seed), teacher(cfg, store, init), bottleneck(cfg, store, init), student(cfg, store, init) {
        teacher.freeze(store);
    }
};

std::vector<Shape> shapes_of(const FeaturePyramid<float>& p) {
    std::vector<Shape> s;
    for (const auto& l : p.levels) s.push_back(l.shape());
    return s;
}

Var<float> image_batch(int size, float fill) { return Var<float>(Tensor<float>({1, 3, size, size}, fill)); }

}  // namespace

TEST(TeacherNet, EncodeProducesShapeLawPyramid) {
    ModelConfig cfg;
    Core<float> core(cfg);
    std::mt19937_64 rng(1);
    Var<float> x(random_tensor({1, 3, 64, 64}, rng, 0.0, 1.0).cast<float>());
    const auto pyr = core.teacher.encode(x);
    const std::vector<Shape> expected{{1, 16, 16, 16}, {1, 32, 8, 8}, {1, 64, 4, 4}};
    EXPECT_EQ(shapes_of(pyr), expected);
    EXPECT_NO_THROW(pyr.check_shape_law(3));
}

TEST(TeacherNet, ZeroImageGivesFinitePyramid) {
    Core<float> core(ModelConfig{});
    EXPECT_TRUE(core.teacher.encode(image_batch(64, 0.0f)).all_finite());
}

TEST(TeacherNet, FrozenEncodeIsBitwiseDeterministic) {
    Core<float> core(ModelConfig{});
    auto x = image_batch(64, 0.3f);
    const auto a = core.teacher.encode(x);
    const auto b = core.teacher.encode(x);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a.levels[k].value(), b.levels[k].value());
    for (const auto& [name, v] : core.store.items())
        if (name.rfind("teacher.", 0) == 0) {
            EXPECT_FALSE(v.requires_grad()) << name;
        }
}

TEST(TeacherNet, RejectsIndivisibleInput) {
    Core<float> core(ModelConfig{});
    EXPECT_THROW(core.teacher.encode(image_batch(60, 0.5f)), ShapeError);
    ModelConfig bad;
    bad.image_size = 40;
    EXPECT_THROW(bad.validate(), ShapeError);
}

TEST(Bottleneck, EmitsLevelKShape) {
    Core<float> core(ModelConfig{});
    const auto pyr = core.teacher.encode(image_batch(64, 0.5f));
    const auto phi = core.bottleneck(pyr);
    EXPECT_EQ(phi.shape(), (Shape{1, 64, 4, 4}));
    EXPECT_EQ(phi.value(), core.bottleneck(pyr).value());
}

TEST(Bottleneck, ZeroPyramidIsFiniteAndLevelCountChecked) {
    ModelConfig cfg;
    Core<float> core(cfg);
    FeaturePyramid<float> zero;
    for (int k = 1; k <= 3; ++k) zero.levels.emplace_back(Tensor<float>(cfg.level_shape(1, k)));
    EXPECT_TRUE(core.bottleneck(zero).value().all_finite());
    zero.levels.pop_back();
    EXPECT_THROW(core.bottleneck(zero), ShapeError);
}

TEST(StudentNet, DecodeMirrorsTeacherShapes) {
    ModelConfig cfg;
    Core<float> core(cfg);
    std::mt19937_64 rng(3);
    Var<float> emb(random_tensor({2, 64, 4, 4}, rng).cast<float>());
    const auto d = core.student.decode(emb);
    const auto t = core.teacher.encode(Var<float>(Tensor<float>({2, 3, 64, 64}, 0.5f)));
    EXPECT_EQ(shapes_of(d), shapes_of(t));
    EXPECT_TRUE(d.all_finite());
    EXPECT_THROW(core.student.decode(Var<float>(Tensor<float>({1, 32, 4, 4}))), ShapeError);
}

TEST(StudentNet, GradientWrtEmbeddingMatchesFiniteDifferences) {
    ModelConfig cfg;
    cfg.base_channels = 2;
    cfg.image_size = 32;
    Core<double> core(cfg, 11);
    std::mt19937_64 rng(5);
    Var<double> emb(random_tensor({1, 8, 2, 2}, rng, 0.1, 1.0), true);
    for (int k = 1; k <= 3; ++k) {
        const std::size_t numel = core.student.decode(emb).level(k).numel();
        for (std::size_t entry : {std::size_t{0}, numel / 2, numel - 1}) {
            auto probe = [&] {
                const Var<double> out = core.student.decode(emb).level(k);
                Tensor<double> pick(out.shape());
                pick[entry] = 1.0;
                return rdshift::testing::dot_probe(out, pick);
            };
            EXPECT_LT(rdshift::testing::max_fd_error(probe, {emb}, 1e-5, 1e-6), 1e-4) << "level " << k;
        }
    }
}

TEST(ParamStore, RejectsDuplicatesAndFindsByName) {
    ParamStore<float> store;
    store.add("a", Tensor<float>({2}));
    EXPECT_THROW(store.add("a", Tensor<float>({2})), ValidationError);
    EXPECT_EQ(store.find("a").numel(), 2u);
    EXPECT_THROW(store.find("b"), ValidationError);
}

TEST(Initializer, FloatAndDoubleAgree) {
    Initializer a(9), b(9);
    const auto f = a.kaiming<float>({4, 3, 3, 3}, 27);
    const auto d = b.kaiming<double>({4, 3, 3, 3}, 27);
    for (std::size_t i = 0; i < f.numel(); ++i) EXPECT_EQ(f[i], static_cast<float>(d[i]));
}
