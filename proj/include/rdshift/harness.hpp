// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rdshift/checkpoint.hpp"
#include "rdshift/config.hpp"
#include "rdshift/eval.hpp"
#include "rdshift/network.hpp"

namespace rdshift {

using Logger = std::function<void(const std::string&)>;

// Worker count for parallel scoring: FICO_THREADS when set, else the
// hardware concurrency; at least 1.
int worker_count();

// ---- dataset ----

struct TestSample {
    fs::path path;
    std::string id;      // <category>_<defect>_<stem>
    std::string defect;  // "good" for normal samples
    int label = 0;
};

struct CategorySplit {
    std::string name;
    std::vector<fs::path> train;
    std::vector<TestSample> test;
};

// root/<category>/{train/good, test/good, test/<defect>, ground_truth/<defect>}.
class DatasetLayout {
public:
    // Throws ValidationError naming the path when the root or a requested
    // category is missing. An empty list selects every category directory
    // except aux/.
    static DatasetLayout open(const fs::path& root, const std::vector<std::string>& categories = {});

    const fs::path& root() const { return root_; }
    const std::vector<std::string>& categories() const { return categories_; }
    // Validates the category: train/ holds only good/, which is non-empty,
    // and test/ holds good/ plus defect directories.
    CategorySplit split(const std::string& category) const;

    static std::vector<TestSample> test_samples(const fs::path& category_dir, const std::string& category);

private:
    fs::path root_;
    std::vector<std::string> categories_;
};

struct AuxSet {
    std::vector<std::string> classes;
    std::vector<fs::path> files;
    std::vector<int> labels;
};
AuxSet open_aux(const fs::path& dataset_root);

// N x 3 x H x W batch; every image must be 3 x size x size.
Tensor<float> stack_images(const std::vector<Image>& images, int size);
Image load_image(const fs::path& path, int size);

// ---- optimization ----

class Adam {
public:
    Adam(std::vector<Var<float>> params, const AdamConfig& cfg);
    void zero_grad();
    void step();
    long steps() const { return t_; }

private:
    std::vector<Var<float>> params_;
    AdamConfig cfg_;
    std::vector<std::vector<float>> m_, v_;
    long t_ = 0;
};

// ---- teacher ----

struct TeacherResult {
    fs::path dir;
    double accuracy = 0.0;
    int epochs = 0;
    std::string digest;
    nlohmann::json history;
};

// Trains the teacher on the auxiliary classification set until the target
// accuracy or the epoch budget is reached, then writes a checkpoint.
TeacherResult build_teacher(const RunConfig& cfg, const fs::path& out_dir, const Logger& log = {});

// Teacher checkpoint of a run: cfg.teacher.path, or <run_dir>/teacher,
// built when absent.
fs::path resolve_teacher(const RunConfig& cfg, const fs::path& run_dir, const Logger& log = {});

// ---- training ----

struct TrainResult {
    std::string category;
    fs::path checkpoint;
    nlohmann::json trajectory;  // one object per optimizer step
    std::string teacher_digest_before, teacher_digest_after;
    double seconds = 0.0;
};

TrainResult train_category(const RunConfig& cfg, const CategorySplit& split, const fs::path& teacher_dir,
                           const fs::path& out_dir, const Logger& log = {});

// Trains one model per category into <run_dir>/<category>/.
std::vector<TrainResult> train(const RunConfig& cfg, const fs::path& run_dir, const Logger& log = {});

// ---- evaluation ----

// Inference network restored from a checkpoint. The filter chain is never
// instantiated and its weights are never read.
struct InferenceModel {
    std::unique_ptr<AnomalyNetwork<float>> net;
    StyleBank bank;
    std::vector<std::string> access_log;

    static InferenceModel load(const fs::path& checkpoint_dir, double tta_lambda);
    // Score and map of one image.
    std::pair<double, Tensor<float>> score(const Image& image, const ScoringConfig& scoring, bool adapt) const;
};

// Writes a corrupted copy of the test and ground-truth splits of every
// category, plus manifest.json with the spec, seed and file digests.
nlohmann::json corrupt_dataset(const fs::path& in_root, const fs::path& out_root, const CorruptionSpec& spec,
                               std::uint64_t seed, const std::vector<std::string>& categories = {});

// Scenario datasets live under <scenario_root>/<scenario>/. Missing ones are
// materialized when `materialize` is set, otherwise a ValidationError names them.
fs::path scenario_dataset(const RunConfig& cfg, const fs::path& scenario_root, const std::string& scenario,
                          bool materialize, const Logger& log = {});

struct EvalResult {
    ResultsTable table;
    std::map<std::string, std::vector<ScoredSample>> samples;
    nlohmann::json tta_effect;  // per category and scenario: mean |score(lambda) - score(0)|
    nlohmann::json access_log;  // per category: tensor names read from the checkpoint
};

// Scores every scenario of every category with the checkpoints under
// run_dir and writes the report to out_dir.
EvalResult evaluate(const RunConfig& cfg, const fs::path& run_dir, const fs::path& out_dir, bool materialize = true,
                    const Logger& log = {});

// ---- experiments ----

struct ExperimentResult {
    Mode mode = Mode::FICO;
    std::uint64_t seed = 0;
    ResultsTable table;
    std::vector<std::string> trace_components;  // loss components present in the trajectories
    double train_seconds = 0.0;

    double id_auroc() const;   // mean over categories of the ID column
    double ood_auroc() const;  // mean over the corrupted-scenario columns
};

// train() into run_dir, then evaluate() into run_dir/eval.
ExperimentResult run_experiment(const RunConfig& cfg, const fs::path& run_dir, const Logger& log = {});

// ---- ablation ----

// Trains and evaluates every mode for every seed on the same dataset and
// writes ablation.json / ablation.csv with one row per mode. Modes must be
// GNL, DISCO, DISCO+DIIFI or FICO. Teachers are shared per seed and
// scenario datasets across the whole ablation.
nlohmann::json ablate(const RunConfig& cfg, const std::vector<Mode>& modes, const std::vector<std::uint64_t>& seeds,
                      const fs::path& out_dir, const Logger& log = {});

}  // namespace rdshift
