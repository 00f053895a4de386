// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <string>

#include <sys/wait.h>

#include "rdshift/harness.hpp"
#include "temp_dir.hpp"

using namespace rdshift;
using rdshift::testing::TempDir;

namespace {

struct CliRun {
    int code;
    std::string out, err;
};

CliRun cli(const std::string& args, const fs::path& scratch) {
    const fs::path out = scratch / "stdout.txt", err = scratch / "stderr.txt";
    const std::string cmd =
        std::string(RDSHIFT_CLI) + " " + args + " > '" + out.string() + "' 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    CliRun r{WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(out), read_file(err)};
    return r;
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

nlohmann::json tiny_config(const fs::path& data) {
    return {{"schema", kRunConfigSchema},
            {"seed", 5},
            {"epochs", 1},
            {"batch_size", 4},
            {"model", {{"base_channels", 4}, {"image_size", 32}, {"disco_blocks", 1}}},
            {"teacher", {{"max_epochs", 1}}},
            {"eval", {{"heatmaps", false}}},
            {"data", {{"root", data.string()}, {"scenarios", {"ID", "gaussian_noise_s3"}}}}};
}

std::string synth_args(const fs::path& out) {
    return "synth --out '" + out.string() +
           "' --seed 2 --categories checker --size 32 --train 5 --test-good 3 --test-defect 3 --aux 3";
}

}  // namespace

TEST(Cli, UsageErrorsExitWithOne) {
    TempDir t;
    CliRun r = cli("", t.path());
    EXPECT_EQ(r.code, 1);
    EXPECT_TRUE(contains(r.err, "Usage"));
    r = cli("train --out o --bogus 1", t.path());
    EXPECT_EQ(r.code, 1);
    EXPECT_TRUE(contains(r.err, "bogus"));
    r = cli("frobnicate", t.path());
    EXPECT_EQ(r.code, 1);
    r = cli("train", t.path());  // --out is required
    EXPECT_EQ(r.code, 1);
    r = cli("--help", t.path());
    EXPECT_EQ(r.code, 0);
    EXPECT_TRUE(contains(r.out, "ablate"));
}

TEST(Cli, MissingDatasetNamesThePath) {
    TempDir t;
    write_json_atomic(t.path() / "cfg.json", tiny_config(t.path() / "no_such_data"));
    const CliRun r = cli("train --config '" + (t.path() / "cfg.json").string() + "' --out '" +
                          (t.path() / "run").string() + "'",
                      t.path());
    EXPECT_EQ(r.code, 1);
    EXPECT_TRUE(contains(r.err, "no_such_data")) << r.err;
}

TEST(Cli, InvalidInputsExitWithOne) {
    TempDir t;
    EXPECT_EQ(cli("corrupt --in x --out y --kind fog", t.path()).code, 1);
    EXPECT_EQ(cli("corrupt --in x --out y --kind brightness --severity 9", t.path()).code, 1);
    write_file_atomic(t.path() / "bad.json", "{\"epochs\": 3, \"epoch\": 4}");
    CliRun r = cli("train --config '" + (t.path() / "bad.json").string() + "' --out o", t.path());
    EXPECT_EQ(r.code, 1);
    EXPECT_TRUE(contains(r.err, "epoch")) << r.err;
    write_file_atomic(t.path() / "broken.json", "{\"epochs\": ");
    EXPECT_EQ(cli("train --config '" + (t.path() / "broken.json").string() + "' --out o", t.path()).code, 1);
    EXPECT_EQ(cli("ablate --out o --modes RD,FICO", t.path()).code, 1);
}

TEST(Cli, DivergentTrainingExitsWithTwo) {
    TempDir t;
    ASSERT_EQ(cli(synth_args(t.path() / "data"), t.path()).code, 0);
    nlohmann::json cfg = tiny_config(t.path() / "data");
    cfg["optimizer"] = {{"learning_rate", 1e30}};
    cfg["epochs"] = 3;
    write_json_atomic(t.path() / "cfg.json", cfg);
    const CliRun r = cli("train --config '" + (t.path() / "cfg.json").string() + "' --out '" +
                          (t.path() / "run").string() + "'",
                      t.path());
    EXPECT_EQ(r.code, 2) << r.err;
    EXPECT_TRUE(contains(r.err, "non-finite")) << r.err;
}

TEST(Cli, GradcheckWritesPassingReport) {
    TempDir t;
    const CliRun r = cli("gradcheck --out '" + (t.path() / "grad.json").string() + "'", t.path());
    EXPECT_EQ(r.code, 0) << r.err;
    const nlohmann::json j = read_json(t.path() / "grad.json");
    EXPECT_TRUE(j["passed"].get<bool>());
}

TEST(Cli, PipelineAndReportRegeneration) {
    TempDir t;
    const fs::path data = t.path() / "data";
    ASSERT_EQ(cli(synth_args(data), t.path()).code, 0);
    write_json_atomic(t.path() / "cfg.json", tiny_config(data));
    const std::string cfg = " --config '" + (t.path() / "cfg.json").string() + "'";
    const std::string run = (t.path() / "run").string(), ev = (t.path() / "eval").string();

    CliRun r = cli("teacher" + cfg + " --out '" + run + "/teacher'", t.path());
    ASSERT_EQ(r.code, 0) << r.err;
    r = cli("train" + cfg + " --out '" + run + "' --mode DISCO+DIIFI", t.path());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_json(fs::path(run) / "checker" / "checkpoint" / "manifest.json")["meta"]["mode"], "DISCO+DIIFI");
    r = cli("eval" + cfg + " --run '" + run + "' --out '" + ev + "' --no-materialize", t.path());
    EXPECT_EQ(r.code, 1);  // the noise scenario has not been generated yet
    EXPECT_TRUE(contains(r.err, "gaussian_noise_s3")) << r.err;

    r = cli("corrupt --in '" + data.string() + "' --out '" + ev + "/scenarios/gaussian_noise_s3' --kind gaussian_noise "
            "--severity 3 --seed 5",
            t.path());
    ASSERT_EQ(r.code, 0) << r.err;
    r = cli("eval" + cfg + " --run '" + run + "' --out '" + ev + "' --no-materialize", t.path());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, read_file(fs::path(ev) / "results.csv"));
    EXPECT_TRUE(contains(r.out, "category,ID,gaussian_noise_s3,average"));

    r = cli("report --in '" + ev + "' --out '" + (t.path() / "again").string() + "'", t.path());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_file(t.path() / "again" / "results.csv"), read_file(fs::path(ev) / "results.csv"));
    EXPECT_EQ(read_file(t.path() / "again" / "hist" / "ID.json"), read_file(fs::path(ev) / "hist" / "ID.json"));
}
