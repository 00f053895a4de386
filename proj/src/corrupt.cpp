// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "rdshift/severity_tables.hpp"
#include "rdshift/shift.hpp"

namespace rdshift {

std::string to_string(CorruptionKind kind) {
    switch (kind) {
        case CorruptionKind::Brightness: return "brightness";
        case CorruptionKind::Contrast: return "contrast";
        case CorruptionKind::DefocusBlur: return "defocus_blur";
        case CorruptionKind::GaussianNoise: return "gaussian_noise";
    }
    return "?";
}

CorruptionKind parse_corruption(const std::string& name) {
    for (CorruptionKind k : all_corruptions())
        if (to_string(k) == name) return k;
    throw ValidationError("unknown corruption kind '" + name + "'");
}

const std::vector<CorruptionKind>& all_corruptions() {
    static const std::vector<CorruptionKind> kinds{CorruptionKind::Brightness, CorruptionKind::Contrast,
                                                   CorruptionKind::DefocusBlur, CorruptionKind::GaussianNoise};
    return kinds;
}

CorruptionSpec CorruptionSpec::from_severity(CorruptionKind kind, int level) {
    if (level < 1 || level > 5) throw ValidationError("severity must be in 1..5, got " + std::to_string(level));
    const auto i = static_cast<std::size_t>(level - 1);
    CorruptionSpec s{kind, 0.0, level};
    switch (kind) {
        case CorruptionKind::Brightness: s.param = severity::kBrightnessDelta[i]; break;
        case CorruptionKind::Contrast: s.param = severity::kContrastFactor[i]; break;
        case CorruptionKind::DefocusBlur: s.param = severity::kDefocusRadius[i]; break;
        case CorruptionKind::GaussianNoise: s.param = severity::kNoiseSigma[i]; break;
    }
    return s;
}

CorruptionSpec CorruptionSpec::neutral(CorruptionKind kind) {
    return {kind, kind == CorruptionKind::Contrast ? 1.0 : 0.0, 0};
}

void CorruptionSpec::validate() const {
    if (!std::isfinite(param)) throw ValidationError(to_string(kind) + ": parameter must be finite");
    switch (kind) {
        case CorruptionKind::Brightness:
            if (param < 0.0 || param > 1.0) throw ValidationError("brightness delta must be in [0, 1]");
            break;
        case CorruptionKind::Contrast:
            if (param <= 0.0) throw ValidationError("contrast factor must be > 0");
            break;
        case CorruptionKind::DefocusBlur:
            if (param < 0.0) throw ValidationError("defocus radius must be >= 0");
            break;
        case CorruptionKind::GaussianNoise:
            if (param < 0.0) throw ValidationError("noise sigma must be >= 0");
            break;
    }
}

std::string CorruptionSpec::scenario_name() const {
    return severity > 0 ? to_string(kind) + "_s" + std::to_string(severity) : to_string(kind) + "_custom";
}

nlohmann::json CorruptionSpec::to_json() const {
    return {{"kind", to_string(kind)}, {"param", param}, {"severity", severity},
            {"table_version", severity::kTableVersion}};
}

std::vector<float> disk_kernel(double radius) {
    if (!(radius >= 0.0)) throw ValidationError("disk radius must be >= 0");
    const int half = static_cast<int>(std::floor(radius));
    const int size = 2 * half + 1;
    std::vector<float> k(static_cast<std::size_t>(size) * size, 0.0f);
    int count = 0;
    for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx)
            if (dx * dx + dy * dy <= radius * radius) {
                k[static_cast<std::size_t>(dy + half) * size + dx + half] = 1.0f;
                ++count;
            }
    for (auto& v : k) v /= static_cast<float>(count);
    return k;
}

std::vector<float> gaussian_kernel(double sigma) {
    if (!(sigma >= 0.0)) throw ValidationError("gaussian sigma must be >= 0");
    if (sigma == 0.0) return {1.0f};
    const int half = static_cast<int>(std::ceil(3.0 * sigma));
    const int size = 2 * half + 1;
    std::vector<double> w(static_cast<std::size_t>(size) * size);
    double total = 0.0;
    for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx) {
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            w[static_cast<std::size_t>(dy + half) * size + dx + half] = v;
            total += v;
        }
    std::vector<float> k(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) k[i] = static_cast<float>(w[i] / total);
    return k;
}

namespace {

int reflect(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
}

}  // namespace

Image filter_reflect(const Image& img, const std::vector<float>& kernel) {
    const int size = static_cast<int>(std::lround(std::sqrt(static_cast<double>(kernel.size()))));
    if (size * size != static_cast<int>(kernel.size()) || size % 2 == 0)
        throw ShapeError("filter kernel must be an odd square");
    const int half = size / 2;
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    Image out(img.shape());
    for (int c = 0; c < C; ++c) {
        const float* src = img.data() + static_cast<std::size_t>(c) * H * W;
        float* dst = out.data() + static_cast<std::size_t>(c) * H * W;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                float acc = 0.0f;
                for (int dy = -half; dy <= half; ++dy) {
                    const float* row = src + static_cast<std::size_t>(reflect(y + dy, H)) * W;
                    const float* krow = kernel.data() + static_cast<std::size_t>(dy + half) * size + half;
                    for (int dx = -half; dx <= half; ++dx) acc += krow[dx] * row[reflect(x + dx, W)];
                }
                dst[static_cast<std::size_t>(y) * W + x] = acc;
            }
    }
    return out;
}

Image gaussian_blur_reflect(const Image& img, double sigma) {
    if (!(sigma >= 0.0)) throw ValidationError("gaussian sigma must be >= 0");
    if (sigma == 0.0) return img;
    const int half = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> w(2 * half + 1);
    double total = 0.0;
    for (int d = -half; d <= half; ++d) total += w[d + half] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    std::vector<float> k(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) k[i] = static_cast<float>(w[i] / total);

    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    Image tmp(img.shape()), out(img.shape());
    for (int c = 0; c < C; ++c) {
        const float* src = img.data() + static_cast<std::size_t>(c) * H * W;
        float* mid = tmp.data() + static_cast<std::size_t>(c) * H * W;
        float* dst = out.data() + static_cast<std::size_t>(c) * H * W;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                float acc = 0.0f;
                for (int d = -half; d <= half; ++d) acc += k[d + half] * src[y * W + reflect(x + d, W)];
                mid[y * W + x] = acc;
            }
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                float acc = 0.0f;
                for (int d = -half; d <= half; ++d) acc += k[d + half] * mid[reflect(y + d, H) * W + x];
                dst[y * W + x] = acc;
            }
    }
    return out;
}

namespace {

void clip01(Image& img) {
    for (auto& v : img.values()) v = std::clamp(v, 0.0f, 1.0f);
}

}  // namespace

Image corrupt(const Image& img, const CorruptionSpec& spec, std::uint64_t seed) {
    spec.validate();
    if (img.rank() != 3) throw ShapeError("corrupt expects C x H x W, got " + shape_str(img.shape()));
    Image out = img;
    const int C = img.dim(0);
    const std::size_t plane = static_cast<std::size_t>(img.dim(1)) * img.dim(2);
    switch (spec.kind) {
        case CorruptionKind::Brightness: {
            const auto d = static_cast<float>(spec.param);
            for (auto& v : out.values()) v += d;
            break;
        }
        case CorruptionKind::Contrast: {
            // x * c + mean * (1 - c), per channel
            const auto c = static_cast<float>(spec.param);
            for (int ch = 0; ch < C; ++ch) {
                float* p = out.data() + ch * plane;
                double sum = 0.0;
                for (std::size_t i = 0; i < plane; ++i) sum += p[i];
                const float mean = static_cast<float>(sum / static_cast<double>(plane));
                for (std::size_t i = 0; i < plane; ++i) p[i] = p[i] * c + mean * (1.0f - c);
            }
            break;
        }
        case CorruptionKind::DefocusBlur:
            out = filter_reflect(img, disk_kernel(spec.param));
            break;
        case CorruptionKind::GaussianNoise: {
            Rng rng(seed);
            const auto s = static_cast<float>(spec.param);
            for (auto& v : out.values()) v += s * static_cast<float>(rng.normal());
            break;
        }
    }
    clip01(out);
    return out;
}

}  // namespace rdshift
