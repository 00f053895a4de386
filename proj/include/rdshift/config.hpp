// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rdshift/eval.hpp"
#include "rdshift/losses.hpp"
#include "rdshift/model.hpp"
#include "rdshift/shift.hpp"

namespace rdshift {

inline constexpr const char* kRunConfigSchema = "rdshift-run-v1";

struct AdamConfig {
    double learning_rate = 0.005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    void validate() const;
};

struct TeacherConfig {
    std::string path;  // existing teacher checkpoint; empty builds one under the output directory
    int max_epochs = 30;
    double target_accuracy = 0.9;
    int batch_size = 8;
    AdamConfig optimizer{0.001};
    void validate() const;
};

struct EvalConfig {
    double tta_lambda = 0.8;
    ScoringConfig scoring;
    bool heatmaps = true;
    void validate() const;
};

struct DataConfig {
    std::string root = "data";
    std::vector<std::string> categories;  // empty means every category under root
    std::string scenario_root;            // empty means <output>/scenarios
    std::vector<std::string> scenarios{"ID", "brightness_s3", "contrast_s3", "defocus_blur_s3", "gaussian_noise_s3"};
    int max_train_images = 0;             // 0 uses every training image
    void validate() const;
};

struct RunConfig {
    std::uint64_t seed = 0;
    Mode mode = Mode::FICO;
    int epochs = 20;
    int batch_size = 8;
    AdamConfig optimizer;
    LossWeights weights;
    ModelConfig model;
    AugmentPolicy augment;  // augment.seed is ignored; views are seeded from `seed` and the epoch
    TeacherConfig teacher;
    EvalConfig eval;
    DataConfig data;

    void validate() const;
    nlohmann::json to_json() const;
    // Missing keys keep their defaults; unknown keys and a wrong schema are rejected.
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const fs::path& path);
    std::string digest() const;  // sha256 of the canonical JSON
};

// "ID" yields nullopt; "<kind>_s<level>" yields the table spec.
std::optional<CorruptionSpec> parse_scenario(const std::string& name);

}  // namespace rdshift
