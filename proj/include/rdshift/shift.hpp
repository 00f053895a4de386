// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rdshift/io.hpp"
#include "rdshift/model.hpp"
#include "rdshift/rng.hpp"

namespace rdshift {

// ---- corruptions ----

enum class CorruptionKind { Brightness, Contrast, DefocusBlur, GaussianNoise };

std::string to_string(CorruptionKind kind);
CorruptionKind parse_corruption(const std::string& name);
const std::vector<CorruptionKind>& all_corruptions();

struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::Brightness;
    double param = 0.0;  // delta, factor c, radius r or sigma, by kind
    int severity = 0;    // 1..5 when taken from the tables, 0 otherwise

    static CorruptionSpec from_severity(CorruptionKind kind, int level);
    static CorruptionSpec neutral(CorruptionKind kind);
    void validate() const;
    std::string scenario_name() const;  // e.g. "gaussian_noise_s3"
    nlohmann::json to_json() const;
};

// Normalized binary disk (dx^2 + dy^2 <= r^2) of half-width floor(r), row-major.
std::vector<float> disk_kernel(double radius);
std::vector<float> gaussian_kernel(double sigma);  // half-width ceil(3 sigma)

// Per-channel 2D correlation with numpy-style reflect padding.
Image filter_reflect(const Image& img, const std::vector<float>& kernel);
// Separable equivalent of filter_reflect(img, gaussian_kernel(sigma)).
Image gaussian_blur_reflect(const Image& img, double sigma);

// Output clipped to [0, 1]. `seed` drives the noise stream only.
Image corrupt(const Image& img, const CorruptionSpec& spec, std::uint64_t seed);

// ---- training views ----

struct Range {
    double lo = 0.0, hi = 0.0;
    bool contains(double v) const { return v >= lo && v <= hi; }
};

struct AugmentPolicy {
    int views = 2;  // N
    Range brightness{-0.1, 0.1};
    Range contrast{0.8, 1.2};
    Range blur_sigma{0.0, 1.0};
    Range noise_sigma{0.0, 0.03};
    std::uint64_t seed = 0;

    void validate() const;
    static AugmentPolicy neutral(int views, std::uint64_t seed);
};

struct ViewParams {
    double brightness = 0.0, contrast = 1.0, blur_sigma = 0.0, noise_sigma = 0.0;
    std::uint64_t noise_seed = 0;
};

ViewParams sample_view(const AugmentPolicy& policy, std::uint64_t image_index, int view_index);
Image apply_view(const Image& img, const ViewParams& p);
std::vector<Image> make_views(const Image& img, const AugmentPolicy& policy, std::uint64_t image_index);

// ---- feature distribution matching ----

// out[i] = (1 - lambda) * content[i] + lambda * style_sorted[rank(content[i])],
// ranks ascending with ties broken by index.
template <typename T>
std::vector<T> efdm_match(std::span<const T> content, std::span<const T> style_sorted, double lambda);

// Per-channel sorted level-1 teacher values of normal training samples: the
// element-wise mean of every sample's sorted channel array.
struct StyleBank {
    int channels = 0;
    int length = 0;  // values per channel (H1 * W1)
    std::vector<float> sorted;  // channels x length
    double lambda = 0.8;

    bool empty() const { return sorted.empty(); }
    std::span<const float> channel(int c) const {
        return std::span<const float>(sorted).subspan(static_cast<std::size_t>(c) * length, length);
    }
    Tensor<float> as_tensor() const { return Tensor<float>({channels, length}, sorted); }
    static StyleBank from_tensor(const Tensor<float>& t, double lambda);
};

class StyleBankBuilder {
public:
    void add(const Tensor<float>& level1);  // N x C x H x W
    StyleBank build(double lambda) const;

private:
    int channels_ = 0, length_ = 0;
    std::size_t count_ = 0;
    std::vector<double> sum_;
};

// Matches level 1 of every sample to the bank and recomputes deeper levels
// with the teacher. Returns the input unchanged when lambda is 0.
FeaturePyramid<float> tta_adapt(const FeaturePyramid<float>& teacher_pyramid, const StyleBank& bank,
                                const TeacherNet<float>& teacher);

// ---- synthetic dataset ----

struct SynthSpec {
    std::vector<std::string> categories{"stripes", "checker", "blobs"};
    int image_size = 64;
    int train_per_category = 80;
    int test_good_per_category = 20;
    int test_defect_per_category = 21;  // split round-robin over the defect types
    int aux_per_family = 200;
    void validate() const;
    nlohmann::json to_json() const;
};

const std::vector<std::string>& texture_families();
const std::vector<std::string>& defect_types();

// Renders one normal texture sample of `family`. `palette_from_family`
// selects the family's fixed colors; otherwise colors are drawn at random
// (used for the auxiliary classification set).
Image render_texture(const std::string& family, int size, Rng& rng, bool palette_from_family = true);
// Injects a defect in place and returns its binary mask (1 x H x W, non-empty).
Image inject_defect(Image& img, const std::string& defect, Rng& rng);

// Writes the dataset under `root` and returns the manifest (also written to
// root/manifest.json) with per-file digests.
nlohmann::json synth_dataset(std::uint64_t seed, const SynthSpec& spec, const fs::path& root);

}  // namespace rdshift
