// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rdshift/diagnostics.hpp"
#include "rdshift/harness.hpp"

using namespace rdshift;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kFailed = 2;

const auto kStart = std::chrono::steady_clock::now();

void log_line(const std::string& msg) {
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - kStart).count();
    std::fprintf(stderr, "[%8.2fs] %s\n", t, msg.c_str());
}

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
    cmd->add_option("--config", c.config, "run configuration JSON");
    cmd->add_option("--seed", c.seed, "override the configured seed");
    auto* out = cmd->add_option("--out", c.out, "output directory");
    if (out_required) out->required();
}

RunConfig load_config(const Common& c) {
    RunConfig cfg = c.config.empty() ? RunConfig{} : RunConfig::load(c.config);
    if (c.seed) cfg.seed = *c.seed;
    cfg.validate();
    return cfg;
}

template <typename T>
std::vector<T> parse_list(const std::string& csv, T (*parse)(const std::string&)) {
    std::vector<T> out;
    std::stringstream ss(csv);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(parse(item));
    return out;
}

std::uint64_t parse_u64(const std::string& s) {
    try {
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ValidationError("not an unsigned integer: '" + s + "'");
}

std::string identity(const std::string& s) { return s; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reverse-distillation anomaly detection under distribution shift"};
    app.name("rdshift");
    app.require_subcommand(1);

    // synth
    Common synth_opts;
    SynthSpec spec;
    std::string synth_categories;
    auto* synth = app.add_subcommand("synth", "write the synthetic texture dataset");
    add_common(synth, synth_opts);
    synth->add_option("--categories", synth_categories, "comma-separated texture families");
    synth->add_option("--size", spec.image_size, "image size in pixels");
    synth->add_option("--train", spec.train_per_category, "normal training images per category");
    synth->add_option("--test-good", spec.test_good_per_category, "normal test images per category");
    synth->add_option("--test-defect", spec.test_defect_per_category, "anomalous test images per category");
    synth->add_option("--aux", spec.aux_per_family, "auxiliary classification images per family");

    // teacher
    Common teacher_opts;
    auto* teacher = app.add_subcommand("teacher", "pretrain and freeze the teacher on the auxiliary set");
    add_common(teacher, teacher_opts);

    // train
    Common train_opts;
    std::string train_mode;
    auto* train_cmd = app.add_subcommand("train", "train one model per category");
    add_common(train_cmd, train_opts);
    train_cmd->add_option("--mode", train_mode, "RD, GNL, DISCO, DISCO+DIIFI or FICO");

    // eval
    Common eval_opts;
    std::string eval_run;
    std::optional<double> eval_lambda;
    bool no_materialize = false;
    auto* eval_cmd = app.add_subcommand("eval", "score every scenario and write the report");
    add_common(eval_cmd, eval_opts);
    eval_cmd->add_option("--run", eval_run, "directory written by train")->required();
    eval_cmd->add_option("--lambda", eval_lambda, "test-time matching ratio (overrides the config)");
    eval_cmd->add_flag("--no-materialize", no_materialize, "fail instead of generating missing scenario datasets");

    // ablate
    Common ablate_opts;
    std::string ablate_modes = "GNL,DISCO,DISCO+DIIFI,FICO", ablate_seeds;
    auto* ablate_cmd = app.add_subcommand("ablate", "train and evaluate each mode on the same data");
    add_common(ablate_cmd, ablate_opts);
    ablate_cmd->add_option("--modes", ablate_modes, "comma-separated modes");
    ablate_cmd->add_option("--seeds", ablate_seeds, "comma-separated seeds (default: the configured seed)");

    // corrupt
    std::string corrupt_in, corrupt_out, corrupt_kind;
    int corrupt_severity = 3;
    std::uint64_t corrupt_seed = 0;
    auto* corrupt_cmd = app.add_subcommand("corrupt", "write a corrupted copy of a dataset's test split");
    corrupt_cmd->add_option("--in", corrupt_in, "dataset root")->required();
    corrupt_cmd->add_option("--out", corrupt_out, "output root")->required();
    corrupt_cmd->add_option("--kind", corrupt_kind, "brightness, contrast, defocus_blur or gaussian_noise")->required();
    corrupt_cmd->add_option("--severity", corrupt_severity, "severity level 1..5");
    corrupt_cmd->add_option("--seed", corrupt_seed, "noise seed");

    // gradcheck
    Common grad_opts;
    double grad_tol = 1e-4;
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of every loss on a tiny network");
    add_common(grad_cmd, grad_opts, false);
    grad_cmd->add_option("--tolerance", grad_tol, "maximum relative error");

    // report
    std::string report_in, report_out, report_scenarios;
    auto* report_cmd = app.add_subcommand("report", "rebuild tables and histograms from scores.json");
    report_cmd->add_option("--in", report_in, "evaluation directory holding scores.json")->required();
    report_cmd->add_option("--out", report_out, "output directory")->required();
    report_cmd->add_option("--scenarios", report_scenarios, "comma-separated column order");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kInvalid;
    }

    try {
        if (*synth) {
            if (!synth_categories.empty()) spec.categories = parse_list<std::string>(synth_categories, identity);
            spec.validate();
            const nlohmann::json m = synth_dataset(synth_opts.seed.value_or(0), spec, synth_opts.out);
            log_line("wrote " + std::to_string(m["files"].size()) + " files to " + synth_opts.out);
        } else if (*teacher) {
            const TeacherResult r = build_teacher(load_config(teacher_opts), teacher_opts.out, log_line);
            log_line("teacher accuracy " + std::to_string(r.accuracy) + " after " + std::to_string(r.epochs) +
                     " epochs, digest " + r.digest);
        } else if (*train_cmd) {
            RunConfig cfg = load_config(train_opts);
            if (!train_mode.empty()) cfg.mode = parse_mode(train_mode);
            for (const auto& r : train(cfg, train_opts.out, log_line))
                log_line(r.category + ": " + std::to_string(r.trajectory.size()) + " steps, checkpoint " +
                         r.checkpoint.string());
        } else if (*eval_cmd) {
            RunConfig cfg = load_config(eval_opts);
            if (eval_lambda) cfg.eval.tta_lambda = *eval_lambda;
            cfg.validate();
            const EvalResult r = evaluate(cfg, eval_run, eval_opts.out, !no_materialize, log_line);
            std::cout << r.table.to_csv();
        } else if (*ablate_cmd) {
            const RunConfig cfg = load_config(ablate_opts);
            std::vector<std::uint64_t> seeds = parse_list<std::uint64_t>(ablate_seeds, parse_u64);
            if (seeds.empty()) seeds.push_back(cfg.seed);
            const nlohmann::json r = ablate(cfg, parse_list<Mode>(ablate_modes, parse_mode), seeds, ablate_opts.out, log_line);
            std::cout << read_file(fs::path(ablate_opts.out) / "ablation.csv");
        } else if (*corrupt_cmd) {
            const CorruptionSpec s = CorruptionSpec::from_severity(parse_corruption(corrupt_kind), corrupt_severity);
            const nlohmann::json m = corrupt_dataset(corrupt_in, corrupt_out, s, corrupt_seed);
            log_line("wrote " + std::to_string(m["files"].size()) + " files for " + s.scenario_name());
        } else if (*grad_cmd) {
            const TinyGradcheckResult r = run_tiny_gradcheck(grad_opts.seed.value_or(0), grad_tol);
            const std::string text = r.to_json().dump(2);
            if (grad_opts.out.empty())
                std::cout << text << '\n';
            else
                write_file_atomic(grad_opts.out, text + "\n");
            if (!r.passed) {
                log_line("gradient check failed");
                return kFailed;
            }
        } else if (*report_cmd) {
            const nlohmann::json scores = read_json(fs::path(report_in) / "scores.json");
            std::vector<std::string> categories, scenarios = parse_list<std::string>(report_scenarios, identity);
            std::map<std::string, std::vector<ScoredSample>> samples;
            for (const auto& [cat, rows] : scores.items()) {
                categories.push_back(cat);
                for (const auto& row : rows) {
                    ScoredSample s{row.at("id"), row.at("score"), row.at("label"), row.at("scenario")};
                    if (std::find(scenarios.begin(), scenarios.end(), s.scenario) == scenarios.end())
                        scenarios.push_back(s.scenario);
                    samples[cat].push_back(std::move(s));
                }
            }
            std::cout << write_report(report_out, categories, scenarios, samples).to_csv();
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: malformed JSON: " << e.what() << '\n';
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return kFailed;
    }
    return kOk;
}
