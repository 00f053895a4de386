// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <numeric>

#include "rdshift/shift.hpp"

namespace rdshift {

template <typename T>
std::vector<T> efdm_match(std::span<const T> content, std::span<const T> style_sorted, double lambda) {
    if (content.size() != style_sorted.size())
        throw ShapeError("efdm_match: content has " + std::to_string(content.size()) + " values, style has " +
                         std::to_string(style_sorted.size()));
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("efdm_match: lambda must be in [0, 1]");
    std::vector<std::size_t> order(content.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return content[a] < content[b]; });
    const double keep = 1.0 - lambda;
    std::vector<T> out(content.size());
    for (std::size_t r = 0; r < order.size(); ++r)
        out[order[r]] = static_cast<T>(keep * static_cast<double>(content[order[r]]) +
                                       lambda * static_cast<double>(style_sorted[r]));
    return out;
}

template std::vector<float> efdm_match(std::span<const float>, std::span<const float>, double);
template std::vector<double> efdm_match(std::span<const double>, std::span<const double>, double);

StyleBank StyleBank::from_tensor(const Tensor<float>& t, double lambda) {
    if (t.rank() != 2) throw ShapeError("style bank tensor must be channels x length");
    StyleBank b;
    b.channels = t.dim(0);
    b.length = t.dim(1);
    b.sorted.assign(t.storage().begin(), t.storage().end());
    b.lambda = lambda;
    for (int c = 0; c < b.channels; ++c) {
        const auto ch = b.channel(c);
        if (!std::is_sorted(ch.begin(), ch.end())) throw ValidationError("style bank channel is not sorted");
    }
    return b;
}

void StyleBankBuilder::add(const Tensor<float>& level1) {
    if (level1.rank() != 4) throw ShapeError("style bank expects N x C x H x W");
    const int N = level1.dim(0), C = level1.dim(1), L = level1.dim(2) * level1.dim(3);
    if (count_ == 0) {
        channels_ = C;
        length_ = L;
        sum_.assign(static_cast<std::size_t>(C) * L, 0.0);
    } else if (C != channels_ || L != length_) {
        throw ShapeError("style bank: inconsistent level-1 shape " + shape_str(level1.shape()));
    }
    std::vector<float> buf(static_cast<std::size_t>(L));
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const float* src = level1.data() + (static_cast<std::size_t>(n) * C + c) * L;
            std::copy(src, src + L, buf.begin());
            std::sort(buf.begin(), buf.end());
            double* dst = sum_.data() + static_cast<std::size_t>(c) * L;
            for (int i = 0; i < L; ++i) dst[i] += buf[static_cast<std::size_t>(i)];
        }
        ++count_;
    }
}

StyleBank StyleBankBuilder::build(double lambda) const {
    if (count_ == 0) throw ValidationError("style bank: no samples added");
    StyleBank b;
    b.channels = channels_;
    b.length = length_;
    b.lambda = lambda;
    b.sorted.resize(sum_.size());
    for (std::size_t i = 0; i < sum_.size(); ++i) b.sorted[i] = static_cast<float>(sum_[i] / static_cast<double>(count_));
    return b;
}

FeaturePyramid<float> tta_adapt(const FeaturePyramid<float>& teacher_pyramid, const StyleBank& bank,
                                const TeacherNet<float>& teacher) {
    if (bank.empty()) throw ValidationError("tta_adapt: empty style bank");
    if (bank.lambda == 0.0) return teacher_pyramid;
    const Tensor<float>& l1 = teacher_pyramid.level(1).value();
    const int N = l1.dim(0), C = l1.dim(1), L = l1.dim(2) * l1.dim(3);
    if (C != bank.channels || L != bank.length)
        throw ShapeError("tta_adapt: level 1 " + shape_str(l1.shape()) + " does not match the style bank");
    Tensor<float> adapted(l1.shape());
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const std::size_t off = (static_cast<std::size_t>(n) * C + c) * L;
            const auto matched = efdm_match<float>(std::span<const float>(l1.data() + off, L), bank.channel(c), bank.lambda);
            std::copy(matched.begin(), matched.end(), adapted.data() + off);
        }
    return teacher.encode_from_level1(Var<float>(std::move(adapted)));
}

}  // namespace rdshift
