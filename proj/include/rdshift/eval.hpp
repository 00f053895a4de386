// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rdshift/io.hpp"
#include "rdshift/model.hpp"

namespace rdshift {

struct ScoringConfig {
    double smooth_sigma = 4.0;  // pixels; 0 disables smoothing
    int top_k = 0;              // 0 scores by the maximum, k > 0 by the mean of the k largest pixels
    void validate() const;
};

// One sample's map at input resolution, plus each level's upsampled
// contribution before smoothing.
template <typename T>
struct AnomalyMap {
    Tensor<T> values;  // H x W
    std::vector<Tensor<T>> levels;
};

// Bilinear resize of an H x W map (half-pixel centers, edge clamped).
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& map, int out_h, int out_w);

// Separable gaussian smoothing with reflect padding. The output never
// exceeds the input's range.
template <typename T>
Tensor<T> smooth_gaussian(const Tensor<T>& map, double sigma);

// One map per batch entry: per level 1 - cos between channel vectors,
// resized to out_h x out_w, summed over levels, then smoothed.
template <typename T>
std::vector<AnomalyMap<T>> anomaly_map(const FeaturePyramid<T>& teacher, const FeaturePyramid<T>& student,
                                       int out_h, int out_w, double smooth_sigma);

// Maximum pixel, or the mean of the top_k largest pixels when top_k > 0.
template <typename T>
double image_score(const Tensor<T>& map, int top_k = 0);

struct ScoredSample {
    std::string id;
    double score = 0.0;
    int label = 0;  // 0 normal, 1 anomalous
    std::string scenario;
};

// Mann-Whitney statistic with ties credited one half, kept as exact
// integer counts: auroc = twice_wins / (2 * positives * negatives).
struct AurocCounts {
    std::uint64_t twice_wins = 0;
    std::uint64_t positives = 0, negatives = 0;
    double value() const {
        return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
    }
};

// Throws ValidationError unless both labels are present.
AurocCounts auroc_counts(const std::vector<ScoredSample>& samples);
double auroc(const std::vector<ScoredSample>& samples);

inline constexpr const char* kIdScenario = "ID";

// AUROC table: one row per category, one column per scenario, null where a
// scenario was not computed.
struct ResultsTable {
    std::vector<std::string> categories;
    std::vector<std::string> scenarios;
    std::map<std::string, std::map<std::string, std::optional<double>>> auroc;

    void set(const std::string& category, const std::string& scenario, std::optional<double> value);
    std::optional<double> get(const std::string& category, const std::string& scenario) const;
    // Mean over the non-null scenarios of a row / categories of a column.
    std::optional<double> row_mean(const std::string& category) const;
    std::optional<double> column_mean(const std::string& scenario) const;
    std::optional<double> overall_mean() const;

    nlohmann::json to_json() const;  // {category: {scenario: auroc or null}}
    // JSON objects are key-sorted; row and column order come from the given
    // lists first, then from the JSON.
    static ResultsTable from_json(const nlohmann::json& j, const std::vector<std::string>& scenario_order = {},
                                  const std::vector<std::string>& category_order = {});
    std::string to_csv() const;
};

// Normal / anomalous score counts over shared equal-width bins.
nlohmann::json score_histogram(const std::vector<ScoredSample>& samples, int bins = 20);

// Writes results.json, results.csv, scores.json and hist/<scenario>.json
// under `dir`. `samples` maps category to every scored sample of that
// category. Returns the table.
ResultsTable write_report(const fs::path& dir, const std::vector<std::string>& categories,
                          const std::vector<std::string>& scenarios,
                          const std::map<std::string, std::vector<ScoredSample>>& samples);

// 8-bit grayscale heatmap normalized by `scale` (2K for a K-level map).
void write_heatmap(const fs::path& path, const Tensor<float>& map, double scale);

}  // namespace rdshift
