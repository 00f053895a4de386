// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <exception>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "rdshift/harness.hpp"

namespace rdshift {

namespace {

void say(const Logger& log, const std::string& msg) {
    if (log) log(msg);
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first
// exception is rethrown after all threads finish.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

ModelConfig model_from_meta(const nlohmann::json& m) {
    ModelConfig c;
    c.base_channels = m.at("base_channels");
    c.levels = m.at("levels");
    c.image_size = m.at("image_size");
    c.disco_blocks = m.at("disco_blocks");
    c.dyconv_kernels = m.at("dyconv_kernels");
    c.attention_ratio = m.at("attention_ratio");
    c.aux_classes = m.at("aux_classes");
    return c;
}

double mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

}  // namespace

InferenceModel InferenceModel::load(const fs::path& checkpoint_dir, double tta_lambda) {
    CheckpointReader reader(checkpoint_dir);
    const nlohmann::json& meta = reader.meta();
    if (meta.value("kind", "") != "anomaly")
        throw ValidationError("not an anomaly-model checkpoint: " + checkpoint_dir.string());
    InferenceModel m;
    m.net = std::make_unique<AnomalyNetwork<float>>(model_from_meta(meta.at("model")),
                                                    parse_mode(meta.at("mode").get<std::string>()),
                                                    meta.at("seed").get<std::uint64_t>(), false);
    load_params(reader, m.net->params());
    m.net->params().set_trainable("", false);
    m.bank = StyleBank::from_tensor(reader.read("tta.style_bank"), tta_lambda);
    m.access_log = reader.access_log();
    return m;
}

std::pair<double, Tensor<float>> InferenceModel::score(const Image& image, const ScoringConfig& scoring,
                                                       bool adapt) const {
    const int S = net->config().image_size;
    FeaturePyramid<float> t = net->teacher().encode(Var<float>(stack_images({image}, S)));
    if (adapt) t = tta_adapt(t, bank, net->teacher());
    const FeaturePyramid<float> s = net->reconstruct(t);
    auto maps = anomaly_map(t, s, S, S, scoring.smooth_sigma);
    const double value = image_score(maps[0].values, scoring.top_k);
    return {value, std::move(maps[0].values)};
}

fs::path scenario_dataset(const RunConfig& cfg, const fs::path& scenario_root, const std::string& scenario,
                          bool materialize, const Logger& log) {
    const auto spec = parse_scenario(scenario);
    if (!spec) return cfg.data.root;
    const fs::path dir = scenario_root / scenario;
    if (fs::exists(dir / "manifest.json")) {
        const nlohmann::json m = read_json(dir / "manifest.json");
        if (m.at("spec") != spec->to_json())
            throw ValidationError("scenario dataset " + dir.string() + " was generated with a different spec");
        return dir;
    }
    if (!materialize) throw ValidationError("scenario dataset missing: " + dir.string());
    say(log, "materializing " + scenario + " in " + dir.string());
    corrupt_dataset(cfg.data.root, dir, *spec, cfg.seed, cfg.data.categories);
    return dir;
}

EvalResult evaluate(const RunConfig& cfg, const fs::path& run_dir, const fs::path& out_dir, bool materialize,
                    const Logger& log) {
    cfg.validate();
    const DatasetLayout layout = DatasetLayout::open(cfg.data.root, cfg.data.categories);
    const fs::path scenario_root =
        cfg.data.scenario_root.empty() ? out_dir / "scenarios" : fs::path(cfg.data.scenario_root);
    std::map<std::string, fs::path> roots;
    for (const auto& scen : cfg.data.scenarios) roots[scen] = scenario_dataset(cfg, scenario_root, scen, materialize, log);

    const int workers = worker_count();
    EvalResult r;
    r.tta_effect = nlohmann::json::object();
    r.access_log = nlohmann::json::object();
    for (const auto& cat : layout.categories()) {
        const InferenceModel model = InferenceModel::load(run_dir / cat / "checkpoint", cfg.eval.tta_lambda);
        const double map_scale = 2.0 * model.net->config().levels;
        const bool adapt = cfg.eval.tta_lambda > 0.0;
        r.access_log[cat] = model.access_log;
        for (const auto& scen : cfg.data.scenarios) {
            const auto tests = DatasetLayout::test_samples(roots[scen] / cat, cat);
            std::vector<ScoredSample> scored(tests.size());
            std::vector<double> shift(tests.size(), 0.0);
            parallel_for(tests.size(), workers, [&](std::size_t i) {
                const Image img = load_image(tests[i].path, model.net->config().image_size);
                auto [value, map] = model.score(img, cfg.eval.scoring, adapt);
                scored[i] = {tests[i].id, value, tests[i].label, scen};
                if (adapt) shift[i] = std::abs(value - model.score(img, cfg.eval.scoring, false).first);
                if (cfg.eval.heatmaps) write_heatmap(out_dir / "maps" / scen / (tests[i].id + ".png"), map, map_scale);
            });
            r.tta_effect[cat][scen] = mean(shift);
            auto& all = r.samples[cat];
            all.insert(all.end(), scored.begin(), scored.end());
        }
        say(log, "evaluated " + cat);
    }
    r.table = write_report(out_dir, layout.categories(), cfg.data.scenarios, r.samples);
    write_json_atomic(out_dir / "tta_effect.json", {{"lambda", cfg.eval.tta_lambda}, {"mean_abs_score_shift", r.tta_effect}});
    write_json_atomic(out_dir / "access_log.json", r.access_log);
    return r;
}

double ExperimentResult::id_auroc() const {
    const auto v = table.column_mean(kIdScenario);
    if (!v) throw ValidationError("experiment has no ID column");
    return *v;
}

double ExperimentResult::ood_auroc() const {
    std::vector<double> cols;
    for (const auto& s : table.scenarios)
        if (s != kIdScenario)
            if (const auto v = table.column_mean(s)) cols.push_back(*v);
    if (cols.empty()) throw ValidationError("experiment has no corrupted-scenario columns");
    return mean(cols);
}

ExperimentResult run_experiment(const RunConfig& cfg, const fs::path& run_dir, const Logger& log) {
    ExperimentResult r;
    r.mode = cfg.mode;
    r.seed = cfg.seed;
    std::set<std::string> components;
    for (const auto& t : train(cfg, run_dir, log)) {
        r.train_seconds += t.seconds;
        for (const auto& row : t.trajectory)
            for (const auto& [key, _] : row.items())
                if (key.rfind("l_", 0) == 0) components.insert(key);
    }
    r.trace_components.assign(components.begin(), components.end());
    r.table = evaluate(cfg, run_dir, run_dir / "eval", true, log).table;
    return r;
}

nlohmann::json ablate(const RunConfig& cfg, const std::vector<Mode>& modes, const std::vector<std::uint64_t>& seeds,
                      const fs::path& out_dir, const Logger& log) {
    if (modes.empty() || seeds.empty()) throw ValidationError("ablation needs at least one mode and one seed");
    for (Mode m : modes)
        if (m == Mode::RD) throw ValidationError("ablation modes are GNL, DISCO, DISCO+DIIFI and FICO");
    cfg.validate();

    std::map<std::uint64_t, fs::path> teachers;
    for (std::uint64_t seed : seeds) {
        RunConfig c = cfg;
        c.seed = seed;
        teachers[seed] = cfg.teacher.path.empty() ? resolve_teacher(c, out_dir / ("seed" + std::to_string(seed)), log)
                                                  : fs::path(cfg.teacher.path);
    }

    nlohmann::json rows = nlohmann::json::array();
    std::ostringstream csv;
    csv << "mode,seeds";
    for (const auto& s : cfg.data.scenarios) csv << ',' << s;
    csv << ",ood_mean\n";
    for (Mode mode : modes) {
        nlohmann::json per_seed = nlohmann::json::array();
        std::map<std::string, std::vector<double>> columns;
        std::vector<double> ood;
        std::set<std::string> components;
        for (std::uint64_t seed : seeds) {
            RunConfig c = cfg;
            c.mode = mode;
            c.seed = seed;
            c.teacher.path = teachers[seed].string();
            if (c.data.scenario_root.empty()) c.data.scenario_root = (out_dir / "scenarios").string();
            const ExperimentResult e =
                run_experiment(c, out_dir / ("seed" + std::to_string(seed)) / to_string(mode), log);
            for (const auto& s : c.data.scenarios)
                if (const auto v = e.table.column_mean(s)) columns[s].push_back(*v);
            ood.push_back(e.ood_auroc());
            components.insert(e.trace_components.begin(), e.trace_components.end());
            per_seed.push_back({{"seed", seed},
                                {"results", e.table.to_json()},
                                {"ood_mean", ood.back()},
                                {"train_seconds", e.train_seconds}});
        }
        nlohmann::json scen = nlohmann::json::object();
        for (const auto& s : cfg.data.scenarios) scen[s] = columns.count(s) ? nlohmann::json(mean(columns[s])) : nlohmann::json(nullptr);
        nlohmann::json row{{"mode", to_string(mode)},
                           {"seeds", seeds},
                           {"scenarios", scen},
                           {"ood_mean", mean(ood)},
                           {"trace_components", std::vector<std::string>(components.begin(), components.end())},
                           {"per_seed", per_seed}};
        rows.push_back(row);

        csv << to_string(mode) << ',';
        for (std::size_t i = 0; i < seeds.size(); ++i) csv << (i ? ";" : "") << seeds[i];
        for (const auto& s : cfg.data.scenarios) {
            csv << ',';
            if (!scen[s].is_null()) csv << std::to_string(scen[s].get<double>());
        }
        csv << ',' << std::to_string(mean(ood)) << '\n';
    }

    bool monotone = true;
    for (std::size_t i = 1; i < rows.size(); ++i)
        monotone = monotone && rows[i]["ood_mean"].get<double>() > rows[i - 1]["ood_mean"].get<double>();
    const nlohmann::json report{{"rows", rows},
                                {"strictly_increasing_ood", monotone},
                                {"config", cfg.to_json()}};
    write_json_atomic(out_dir / "ablation.json", report);
    write_file_atomic(out_dir / "ablation.csv", csv.str());
    say(log, std::string("ablation ordering strictly increasing in mean OOD AUROC: ") + (monotone ? "yes" : "no"));
    return report;
}

}  // namespace rdshift
