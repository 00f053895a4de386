// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "rdshift/shift.hpp"

namespace rdshift {

namespace {

void check_range(const Range& r, const char* name, double min_allowed) {
    if (!(r.lo <= r.hi) || r.lo < min_allowed) throw ValidationError(std::string("augment range ") + name + " invalid");
}

}  // namespace

void AugmentPolicy::validate() const {
    if (views < 1) throw ValidationError("augment policy needs at least one view");
    check_range(brightness, "brightness", -1.0);
    check_range(contrast, "contrast", 1e-6);
    check_range(blur_sigma, "blur_sigma", 0.0);
    check_range(noise_sigma, "noise_sigma", 0.0);
}

AugmentPolicy AugmentPolicy::neutral(int views, std::uint64_t seed) {
    AugmentPolicy p;
    p.views = views;
    p.brightness = {0.0, 0.0};
    p.contrast = {1.0, 1.0};
    p.blur_sigma = {0.0, 0.0};
    p.noise_sigma = {0.0, 0.0};
    p.seed = seed;
    return p;
}

ViewParams sample_view(const AugmentPolicy& policy, std::uint64_t image_index, int view_index) {
    Rng rng(derive_seed(policy.seed, {image_index, static_cast<std::uint64_t>(view_index)}));
    ViewParams p;
    p.brightness = rng.uniform(policy.brightness.lo, policy.brightness.hi);
    p.contrast = rng.uniform(policy.contrast.lo, policy.contrast.hi);
    p.blur_sigma = rng.uniform(policy.blur_sigma.lo, policy.blur_sigma.hi);
    p.noise_sigma = rng.uniform(policy.noise_sigma.lo, policy.noise_sigma.hi);
    p.noise_seed = rng.next();
    return p;
}

Image apply_view(const Image& img, const ViewParams& p) {
    Image out = img;
    const auto b = static_cast<float>(p.brightness);
    for (auto& v : out.values()) v += b;
    const auto c = static_cast<float>(p.contrast);
    const std::size_t plane = static_cast<std::size_t>(img.dim(1)) * img.dim(2);
    for (int ch = 0; ch < img.dim(0); ++ch) {
        float* px = out.data() + ch * plane;
        double sum = 0.0;
        for (std::size_t i = 0; i < plane; ++i) sum += px[i];
        const float mean = static_cast<float>(sum / static_cast<double>(plane));
        for (std::size_t i = 0; i < plane; ++i) px[i] = px[i] * c + mean * (1.0f - c);
    }
    out = gaussian_blur_reflect(out, p.blur_sigma);
    Rng rng(p.noise_seed);
    const auto s = static_cast<float>(p.noise_sigma);
    for (auto& v : out.values()) v = std::clamp(v + s * static_cast<float>(rng.normal()), 0.0f, 1.0f);
    return out;
}

std::vector<Image> make_views(const Image& img, const AugmentPolicy& policy, std::uint64_t image_index) {
    policy.validate();
    std::vector<Image> views;
    for (int n = 0; n < policy.views; ++n) views.push_back(apply_view(img, sample_view(policy, image_index, n)));
    return views;
}

}  // namespace rdshift
