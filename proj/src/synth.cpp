// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "rdshift/shift.hpp"

namespace rdshift {

namespace {

using Color = std::array<float, 3>;

constexpr double kPi = std::numbers::pi;

struct Palette {
    Color a, b;
};

Palette family_palette(const std::string& family) {
    if (family == "stripes") return {{0.20f, 0.30f, 0.60f}, {0.80f, 0.80f, 0.50f}};
    if (family == "checker") return {{0.15f, 0.15f, 0.15f}, {0.75f, 0.60f, 0.40f}};
    if (family == "blobs") return {{0.30f, 0.50f, 0.25f}, {0.70f, 0.75f, 0.60f}};
    return {{0.55f, 0.40f, 0.30f}, {0.85f, 0.75f, 0.60f}};
}

Color random_color(Rng& rng) {
    return {static_cast<float>(rng.uniform(0.05, 0.95)), static_cast<float>(rng.uniform(0.05, 0.95)),
            static_cast<float>(rng.uniform(0.05, 0.95))};
}

float color_distance(const Color& a, const Color& b) {
    float d = 0.0f;
    for (int c = 0; c < 3; ++c) d += std::abs(a[c] - b[c]);
    return d;
}

// Blend field t in [0, 1] into a two-color image plus faint pixel noise.
Image colorize(const std::vector<double>& t, int size, const Palette& p, Rng& rng) {
    Image img({3, size, size});
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    for (std::size_t i = 0; i < plane; ++i)
        for (int c = 0; c < 3; ++c) {
            const double v = p.a[c] + (p.b[c] - p.a[c]) * t[i] + 0.01 * rng.normal();
            img[c * plane + i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    return img;
}

std::vector<double> stripes_field(int size, Rng& rng) {
    const double angle = (30.0 + rng.uniform(-8.0, 8.0)) * kPi / 180.0;
    const double period = rng.uniform(7.0, 9.0);
    const double phase = rng.uniform(0.0, 2.0 * kPi);
    std::vector<double> t(static_cast<std::size_t>(size) * size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            t[static_cast<std::size_t>(y) * size + x] =
                0.5 + 0.5 * std::sin(2.0 * kPi * (x * std::cos(angle) + y * std::sin(angle)) / period + phase);
    return t;
}

std::vector<double> checker_field(int size, Rng& rng) {
    const double cell = rng.uniform(7.0, 9.0);
    const double angle = rng.uniform(-5.0, 5.0) * kPi / 180.0;
    const double ox = rng.uniform(0.0, 2.0 * cell), oy = rng.uniform(0.0, 2.0 * cell);
    std::vector<double> t(static_cast<std::size_t>(size) * size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double u = x * std::cos(angle) - y * std::sin(angle) + ox;
            const double v = x * std::sin(angle) + y * std::cos(angle) + oy;
            t[static_cast<std::size_t>(y) * size + x] =
                0.5 + 0.5 * std::tanh(4.0 * std::sin(kPi * u / cell) * std::sin(kPi * v / cell));
        }
    return t;
}

std::vector<double> blobs_field(int size, Rng& rng) {
    const int count = 14 + static_cast<int>(rng.below(5));
    std::vector<double> f(static_cast<std::size_t>(size) * size, 0.0);
    for (int b = 0; b < count; ++b) {
        const double cx = rng.uniform(-4.0, size + 4.0), cy = rng.uniform(-4.0, size + 4.0);
        const double s = rng.uniform(3.5, 6.0);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                f[static_cast<std::size_t>(y) * size + x] +=
                    std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (2.0 * s * s));
    }
    for (auto& v : f) v = 1.0 / (1.0 + std::exp(-6.0 * (v - 0.5)));
    return f;
}

std::vector<double> cloth_field(int size, Rng& rng) {
    const double p1 = rng.uniform(0.0, 2.0 * kPi), p2 = rng.uniform(0.0, 2.0 * kPi);
    std::array<double, 4> fx{}, fy{}, ph{};
    for (int i = 0; i < 4; ++i) {
        fx[i] = rng.uniform(-0.08, 0.08);
        fy[i] = rng.uniform(-0.08, 0.08);
        ph[i] = rng.uniform(0.0, 2.0 * kPi);
    }
    std::vector<double> t(static_cast<std::size_t>(size) * size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double low = 0.0;
            for (int i = 0; i < 4; ++i) low += std::sin(2.0 * kPi * (fx[i] * x + fy[i] * y) + ph[i]);
            const double weave = std::sin(2.0 * kPi * x / 4.0 + p1) * std::sin(2.0 * kPi * y / 4.0 + p2);
            t[static_cast<std::size_t>(y) * size + x] = std::clamp(0.5 + 0.3 * weave + 0.08 * low, 0.0, 1.0);
        }
    return t;
}

}  // namespace

const std::vector<std::string>& texture_families() {
    static const std::vector<std::string> f{"stripes", "checker", "blobs", "cloth"};
    return f;
}

const std::vector<std::string>& defect_types() {
    static const std::vector<std::string> d{"contrast_patch", "scratch", "occlusion"};
    return d;
}

void SynthSpec::validate() const {
    if (categories.empty()) throw ValidationError("synth: no categories");
    for (const auto& c : categories)
        if (std::find(texture_families().begin(), texture_families().end(), c) == texture_families().end())
            throw ValidationError("synth: unknown texture family '" + c + "'");
    if (train_per_category <= 0 || test_good_per_category <= 0 || test_defect_per_category <= 0 ||
        aux_per_family <= 0)
        throw ValidationError("synth: all counts must be positive");
    if (image_size < 32 || image_size % 16 != 0) throw ValidationError("synth: image_size must be a multiple of 16, >= 32");
}

nlohmann::json SynthSpec::to_json() const {
    return {{"categories", categories},
            {"image_size", image_size},
            {"train_per_category", train_per_category},
            {"test_good_per_category", test_good_per_category},
            {"test_defect_per_category", test_defect_per_category},
            {"aux_per_family", aux_per_family}};
}

Image render_texture(const std::string& family, int size, Rng& rng, bool palette_from_family) {
    std::vector<double> t;
    if (family == "stripes") t = stripes_field(size, rng);
    else if (family == "checker") t = checker_field(size, rng);
    else if (family == "blobs") t = blobs_field(size, rng);
    else if (family == "cloth") t = cloth_field(size, rng);
    else throw ValidationError("unknown texture family '" + family + "'");
    Palette p = family_palette(family);
    if (palette_from_family) {
        for (int c = 0; c < 3; ++c) {
            p.a[c] += static_cast<float>(rng.uniform(-0.03, 0.03));
            p.b[c] += static_cast<float>(rng.uniform(-0.03, 0.03));
        }
    } else {
        do {
            p = {random_color(rng), random_color(rng)};
        } while (color_distance(p.a, p.b) < 0.6f);
    }
    return colorize(t, size, p, rng);
}

Image inject_defect(Image& img, const std::string& defect, Rng& rng) {
    const int H = img.dim(1), W = img.dim(2);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    Image mask({1, H, W});
    if (defect == "contrast_patch") {
        const int w = 10 + static_cast<int>(rng.below(7)), h = 10 + static_cast<int>(rng.below(7));
        const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(W - w))),
                  y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(H - h)));
        for (int c = 0; c < 3; ++c) {
            double mean = 0.0;
            for (int y = y0; y < y0 + h; ++y)
                for (int x = x0; x < x0 + w; ++x) mean += img[c * plane + y * W + x];
            mean /= w * h;
            const double tint = rng.uniform(-0.2, 0.2);
            for (int y = y0; y < y0 + h; ++y)
                for (int x = x0; x < x0 + w; ++x) {
                    float& v = img[c * plane + y * W + x];
                    v = static_cast<float>(std::clamp(mean + 0.25 * (v - mean) + tint, 0.0, 1.0));
                }
        }
        for (int y = y0; y < y0 + h; ++y)
            for (int x = x0; x < x0 + w; ++x) mask[static_cast<std::size_t>(y) * W + x] = 1.0f;
    } else if (defect == "scratch") {
        const double len = rng.uniform(20.0, 35.0), angle = rng.uniform(0.0, kPi);
        const double cx = rng.uniform(0.3 * W, 0.7 * W), cy = rng.uniform(0.3 * H, 0.7 * H);
        const double dx = std::cos(angle), dy = std::sin(angle);
        const float shade = rng.uniform() < 0.5 ? 0.05f : 0.95f;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double rx = x - cx, ry = y - cy;
                const double along = rx * dx + ry * dy, across = -rx * dy + ry * dx;
                if (std::abs(along) <= len / 2 && std::abs(across) <= 1.0) {
                    for (int c = 0; c < 3; ++c) img[c * plane + y * W + x] = shade;
                    mask[static_cast<std::size_t>(y) * W + x] = 1.0f;
                }
            }
    } else if (defect == "occlusion") {
        const double r = rng.uniform(5.0, 8.0);
        const double cx = rng.uniform(r, W - r), cy = rng.uniform(r, H - r);
        const Color color = random_color(rng);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) {
                    for (int c = 0; c < 3; ++c)
                        img[c * plane + y * W + x] =
                            static_cast<float>(std::clamp(color[c] + 0.02 * rng.normal(), 0.0, 1.0));
                    mask[static_cast<std::size_t>(y) * W + x] = 1.0f;
                }
    } else {
        throw ValidationError("unknown defect type '" + defect + "'");
    }
    return mask;
}

namespace {

std::string numbered(int i, const char* suffix = "") {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%03d%s.png", i, suffix);
    return buf;
}

}  // namespace

nlohmann::json synth_dataset(std::uint64_t seed, const SynthSpec& spec, const fs::path& root) {
    spec.validate();
    nlohmann::json files = nlohmann::json::object();
    auto emit = [&](const fs::path& rel, const Image& img) {
        const std::string bytes = encode_png(img);
        write_file_atomic(root / rel, bytes);
        files[rel.generic_string()] = sha256_hex(bytes);
    };
    const int S = spec.image_size;
    const auto& fams = texture_families();
    for (const auto& cat : spec.categories) {
        const auto cat_id = static_cast<std::uint64_t>(std::find(fams.begin(), fams.end(), cat) - fams.begin());
        for (int i = 0; i < spec.train_per_category; ++i) {
            Rng rng(derive_seed(seed, {cat_id, 0, static_cast<std::uint64_t>(i)}));
            emit(fs::path(cat) / "train" / "good" / numbered(i), render_texture(cat, S, rng));
        }
        for (int i = 0; i < spec.test_good_per_category; ++i) {
            Rng rng(derive_seed(seed, {cat_id, 1, static_cast<std::uint64_t>(i)}));
            emit(fs::path(cat) / "test" / "good" / numbered(i), render_texture(cat, S, rng));
        }
        std::vector<int> per_defect(defect_types().size(), 0);
        for (int i = 0; i < spec.test_defect_per_category; ++i) {
            const std::size_t d = static_cast<std::size_t>(i) % defect_types().size();
            const std::string& defect = defect_types()[d];
            Rng rng(derive_seed(seed, {cat_id, 2, static_cast<std::uint64_t>(i)}));
            Image img = render_texture(cat, S, rng);
            const Image mask = inject_defect(img, defect, rng);
            const int j = per_defect[d]++;
            emit(fs::path(cat) / "test" / defect / numbered(j), img);
            emit(fs::path(cat) / "ground_truth" / defect / numbered(j, "_mask"), mask);
        }
    }
    for (std::size_t f = 0; f < fams.size(); ++f)
        for (int i = 0; i < spec.aux_per_family; ++i) {
            Rng rng(derive_seed(seed, {100 + f, 3, static_cast<std::uint64_t>(i)}));
            emit(fs::path("aux") / fams[f] / numbered(i), render_texture(fams[f], S, rng, false));
        }
    nlohmann::json manifest{{"kind", "rdshift-synth"}, {"seed", seed}, {"spec", spec.to_json()}, {"files", files}};
    write_json_atomic(root / "manifest.json", manifest);
    return manifest;
}

}  // namespace rdshift
