// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--work DIR] [--only 1,2,...]
//
// Exits 0 when every selected criterion passes, 1 otherwise.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eval_oracle.hpp"
#include "loss_oracle.hpp"
#include "rdshift/diagnostics.hpp"
#include "rdshift/diifi.hpp"
#include "rdshift/harness.hpp"
#include "rdshift/losses.hpp"
#include "rdshift/network.hpp"
#include "rdshift/shift.hpp"

using namespace rdshift;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void log_line(const std::string& msg) {
    static const auto start = Clock::now();
    std::fprintf(stderr, "[%8.1fs] %s\n", seconds_since(start), msg.c_str());
}

struct Outcome {
    bool pass = false;
    std::string detail;
    std::vector<std::string> notes;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---- tolerances ----

constexpr double kGradTolerance = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr double kLossSlack = 1e-12;  // rounding slack on values that are exact in real arithmetic
constexpr double kDiskSumTolerance = 1e-6;
constexpr double kIdTarget = 0.90;
constexpr double kGnlMargin = 0.01;
constexpr double kBudgetSeconds = 30.0 * 60.0;

// ---- shared helpers ----

// Standard normal entries; channel vectors with norm below 0.1 are redrawn.
Tensor<double> normal_tensor(const Shape& s, std::mt19937_64& rng) {
    std::normal_distribution<double> d(0.0, 1.0);
    Tensor<double> t(s);
    for (int n = 0; n < s[0]; ++n)
        for (int h = 0; h < s[2]; ++h)
            for (int w = 0; w < s[3]; ++w) {
                double norm = 0.0;
                while (norm < 0.01) {
                    norm = 0.0;
                    for (int c = 0; c < s[1]; ++c) {
                        t.at(n, c, h, w) = d(rng);
                        norm += t.at(n, c, h, w) * t.at(n, c, h, w);
                    }
                }
            }
    return t;
}

// Multiplies each (n, h, w) channel vector by its own factor.
Tensor<double> scale_locations(const Tensor<double>& x, const std::vector<double>& f) {
    Tensor<double> out = x;
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) out.at(n, c, h, w) *= f[(static_cast<std::size_t>(n) * H + h) * W + w];
    return out;
}

Tensor<double> scale_samples(const Tensor<double>& x, const std::vector<double>& f) {
    Tensor<double> out = x;
    const std::size_t per = x.numel() / static_cast<std::size_t>(x.dim(0));
    for (std::size_t i = 0; i < x.numel(); ++i) out[i] *= f[i / per];
    return out;
}

std::vector<double> positive_factors(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> logf(std::log(0.1), std::log(10.0));
    std::vector<double> f(n);
    for (auto& v : f) v = std::exp(logf(rng));
    return f;
}

bool in_range(double v, double lo, double hi) { return v >= lo - kLossSlack && v <= hi + kLossSlack; }
bool near(double a, double b) { return std::abs(a - b) <= kLossSlack * std::max(1.0, std::abs(b)); }

// ---- criteria ----

Outcome gradient_fidelity() {
    const auto t0 = Clock::now();
    const TinyGradcheckResult r = run_tiny_gradcheck(0, kGradTolerance);
    const double secs = seconds_since(t0);
    Outcome o;
    double worst = 0.0;
    std::string worst_label;
    for (const auto& rep : r.reports)
        if (rep.max_rel_error >= worst) {
            worst = rep.max_rel_error;
            worst_label = rep.label;
        }
    o.pass = r.passed && worst < kGradTolerance && secs < kGradSeconds && r.reports.size() == 7;
    o.detail = std::to_string(r.reports.size()) + " objectives, max relative error " + fmt("%.2e", worst) + " (" +
               worst_label + ") < 1e-4, " + fmt("%.1f", secs) + " s < 60 s, network seed " +
               std::to_string(r.network_seed);
    for (const auto& rep : r.reports) o.notes.push_back(rep.label + " " + fmt("%.2e", rep.max_rel_error));
    return o;
}

Outcome loss_invariants() {
    std::mt19937_64 rng(20);
    std::uniform_int_distribution<int> small(1, 4), chans(1, 6), levels(1, 3);
    int failures = 0;
    std::string first;
    auto check = [&](bool ok, const std::string& what, int trial) {
        if (ok) return;
        if (failures++ == 0) first = what + " (trial " + std::to_string(trial) + ")";
    };
    constexpr int kTrials = 1000;
    for (int trial = 0; trial < kTrials; ++trial) {
        const Shape s{small(rng), chans(rng), small(rng), small(rng)};
        const Tensor<double> a = normal_tensor(s, rng), b = normal_tensor(s, rng);
        const std::size_t locs = static_cast<std::size_t>(s[0]) * s[2] * s[3];

        // per-location cosine distance
        const double pl = cosine_per_location(Var<double>(a), Var<double>(b)).item();
        check(in_range(pl, 0.0, 2.0), "per-location range", trial);
        check(near(pl, testing::oracle_per_location(a, b)), "per-location oracle", trial);
        check(near(cosine_per_location(Var<double>(a), Var<double>(a)).item(), 0.0), "per-location identity", trial);
        auto neg = positive_factors(locs, rng);
        for (auto& v : neg) v = -v;
        check(near(cosine_per_location(Var<double>(a), Var<double>(scale_locations(a, neg))).item(), 2.0),
              "per-location antiparallel", trial);
        const double rescaled = cosine_per_location(Var<double>(scale_locations(a, positive_factors(locs, rng))),
                                                    Var<double>(scale_locations(b, positive_factors(locs, rng))))
                                    .item();
        check(near(rescaled, pl), "per-location rescale", trial);

        // per-sample flattened cosine distance
        const auto N = static_cast<std::size_t>(s[0]);
        const double fl = cosine_flat(Var<double>(a), Var<double>(b)).item();
        check(in_range(fl, 0.0, 2.0), "flat range", trial);
        check(near(fl, testing::oracle_flat(a, b)), "flat oracle", trial);
        check(near(cosine_flat(Var<double>(a), Var<double>(a)).item(), 0.0), "flat identity", trial);
        auto negs = positive_factors(N, rng);
        for (auto& v : negs) v = -v;
        check(near(cosine_flat(Var<double>(a), Var<double>(scale_samples(a, negs))).item(), 2.0), "flat antiparallel",
              trial);
        check(near(cosine_flat(Var<double>(scale_samples(a, positive_factors(N, rng))),
                               Var<double>(scale_samples(b, positive_factors(N, rng))))
                       .item(),
                   fl),
              "flat rescale", trial);

        // pyramid distillation loss: one per-location term per level
        const int K = levels(rng);
        const int n = small(rng), c0 = chans(rng), side = 1 << K;
        FeaturePyramid<double> t, st, same, anti, t_scaled, st_scaled;
        for (int k = 0; k < K; ++k) {
            const Shape ls{n, c0 << k, side >> k, side >> k};
            const Tensor<double> ta = normal_tensor(ls, rng), sb = normal_tensor(ls, rng);
            const std::size_t lk = static_cast<std::size_t>(n) * ls[2] * ls[3];
            auto negk = positive_factors(lk, rng);
            for (auto& v : negk) v = -v;
            t.levels.emplace_back(ta);
            st.levels.emplace_back(sb);
            same.levels.emplace_back(ta);
            anti.levels.emplace_back(scale_locations(ta, negk));
            t_scaled.levels.emplace_back(scale_locations(ta, positive_factors(lk, rng)));
            st_scaled.levels.emplace_back(scale_locations(sb, positive_factors(lk, rng)));
        }
        const double rd = loss_rd(t, st).item();
        check(in_range(rd, 0.0, 2.0 * K), "rd range", trial);
        check(near(loss_rd(t, same).item(), 0.0), "rd identity", trial);
        check(near(loss_rd(t, anti).item(), 2.0 * K), "rd antiparallel", trial);
        check(near(loss_rd(t_scaled, st_scaled).item(), rd), "rd rescale", trial);
    }
    Outcome o;
    o.pass = failures == 0;
    o.detail = std::to_string(kTrials) + " trials x 15 properties (per-location, flat, pyramid), " +
               std::to_string(failures) + " failures" + (first.empty() ? "" : ", first: " + first);
    return o;
}

Outcome shape_law() {
    std::mt19937_64 rng(30);
    constexpr int kTrials = 200;
    int failures = 0;
    std::string first;
    for (int trial = 0; trial < kTrials; ++trial) {
        const int K = 2 + static_cast<int>(rng() % 3);
        const int C = 1 + static_cast<int>(rng() % 8);
        const int unit = 1 << (K - 1);
        const int H = unit * (1 + static_cast<int>(rng() % 4));
        const int W = unit * (1 + static_cast<int>(rng() % 4));
        ParamStore<float> store;
        Initializer init(static_cast<std::uint64_t>(trial));
        FilterChain<float> chain(C, K, store, init);
        const auto out = chain.transform(Var<float>(Tensor<float>({1, C, H, W}, 0.5f)));
        bool ok = static_cast<int>(out.size()) == K - 1;
        for (int k = 2; ok && k <= K; ++k)
            ok = out[static_cast<std::size_t>(k - 2)].shape() == Shape{1, C << (k - 1), H >> (k - 1), W >> (k - 1)};
        if (!ok && failures++ == 0)
            first = "C=" + std::to_string(C) + " H=" + std::to_string(H) + " W=" + std::to_string(W) +
                    " K=" + std::to_string(K);
    }
    Outcome o;
    o.pass = failures == 0;
    o.detail = std::to_string(kTrials) + " random (C,H,W,K), " + std::to_string(failures) + " failures" +
               (first.empty() ? "" : ", first: " + first);
    return o;
}

std::vector<std::size_t> stable_ranks(const std::vector<float>& v) {
    std::vector<std::size_t> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::size_t below = 0;
        for (std::size_t j = 0; j < v.size(); ++j)
            if (v[j] < v[i] || (v[j] == v[i] && j < i)) ++below;
        r[i] = below;
    }
    return r;
}

bool within_one_ulp(float got, double want) {
    const float w = static_cast<float>(want);
    return got == w || got == std::nextafter(w, std::numeric_limits<float>::infinity()) ||
           got == std::nextafter(w, -std::numeric_limits<float>::infinity());
}

Outcome efdm_exactness() {
    std::mt19937_64 rng(40);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    constexpr int kTrials = 1000;
    int exact_fail = 0, rank_fail = 0, blend_fail = 0, arrays_with_ties = 0;
    for (int trial = 0; trial < kTrials; ++trial) {
        const std::size_t n = 1 + rng() % 96;
        const int levels = 1 + static_cast<int>(rng() % 12);
        std::vector<float> content(n), style(n);
        for (auto& v : content) v = static_cast<float>(static_cast<int>(rng() % levels)) * 0.25f - 1.0f;
        for (auto& v : style) v = static_cast<float>(normal(rng));
        std::sort(style.begin(), style.end());
        if (std::set<float>(content.begin(), content.end()).size() < n) ++arrays_with_ties;

        const auto out = efdm_match<float>(content, style, 1.0);
        auto sorted = out;
        std::sort(sorted.begin(), sorted.end());
        if (std::memcmp(sorted.data(), style.data(), n * sizeof(float)) != 0) ++exact_fail;
        const auto ranks = stable_ranks(content);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (content[i] < content[j] && !(out[i] <= out[j])) {
                    ++rank_fail;
                    i = j = n;
                }
        bool blend_ok = true;
        const double lambda = unit(rng);
        const auto mixed = efdm_match<float>(content, style, lambda);
        for (std::size_t i = 0; i < n; ++i) {
            blend_ok = blend_ok && out[i] == style[ranks[i]];
            const double want = (1.0 - lambda) * content[i] + lambda * style[ranks[i]];
            blend_ok = blend_ok && within_one_ulp(mixed[i], want);
        }
        if (!blend_ok) ++blend_fail;
    }

    // Level-1 teacher features under test-time matching with lambda = 1.
    ModelConfig cfg;
    cfg.base_channels = 4;
    cfg.image_size = 32;
    ParamStore<float> store;
    Initializer init(41);
    TeacherNet<float> teacher(cfg, store, init);
    Tensor<float> ref({2, 3, 32, 32}), target({1, 3, 32, 32});
    for (auto& v : ref.values()) v = static_cast<float>(unit(rng));
    for (auto& v : target.values()) v = static_cast<float>(0.3 + 0.3 * unit(rng));
    StyleBankBuilder builder;
    builder.add(teacher.encode(Var<float>(ref)).level(1).value());
    const StyleBank bank = builder.build(1.0);
    const FeaturePyramid<float> adapted = tta_adapt(teacher.encode(Var<float>(target)), bank, teacher);
    const Tensor<float>& l1 = adapted.level(1).value();
    const int L = l1.dim(2) * l1.dim(3);
    int channel_fail = 0;
    for (int c = 0; c < l1.dim(1); ++c) {
        std::vector<float> ch(l1.data() + static_cast<std::size_t>(c) * L, l1.data() + static_cast<std::size_t>(c + 1) * L);
        std::sort(ch.begin(), ch.end());
        const auto want = bank.channel(c);
        if (std::memcmp(ch.data(), want.data(), ch.size() * sizeof(float)) != 0) ++channel_fail;
    }

    Outcome o;
    o.pass = exact_fail == 0 && rank_fail == 0 && blend_fail == 0 && channel_fail == 0;
    o.detail = std::to_string(kTrials) + " arrays (" + std::to_string(arrays_with_ties) +
               " with ties): sorted output != style " + std::to_string(exact_fail) + ", rank violations " +
               std::to_string(rank_fail) + ", blend > 1 ulp " + std::to_string(blend_fail) +
               "; feature channels != bank " + std::to_string(channel_fail) + "/" + std::to_string(l1.dim(1));
    return o;
}

Outcome auroc_oracle() {
    std::mt19937_64 rng(50);
    std::uniform_int_distribution<int> size(2, 200), distinct(1, 50);
    constexpr int kTrials = 500;
    int failures = 0, max_n = 0;
    for (int trial = 0; trial < kTrials; ++trial) {
        const int n = size(rng), d = distinct(rng);
        std::vector<ScoredSample> s;
        std::uniform_int_distribution<int> score(0, d - 1);
        const double p_pos = std::uniform_real_distribution<double>(0.1, 0.9)(rng);
        for (int i = 0; i < n; ++i)
            s.push_back({std::to_string(i), score(rng) / 7.0, std::bernoulli_distribution(p_pos)(rng) ? 1 : 0, "ID"});
        s[0].label = 1;
        s[1].label = 0;
        max_n = std::max(max_n, n);
        std::uint64_t twice = 0;
        for (const auto& p : s)
            for (const auto& q : s)
                if (p.label == 1 && q.label == 0) twice += p.score > q.score ? 2 : (p.score == q.score ? 1 : 0);
        const AurocCounts c = auroc_counts(s);
        if (c.twice_wins != twice || auroc(s) != testing::oracle_auroc_pairs(s)) ++failures;
    }
    Outcome o;
    o.pass = failures == 0;
    o.detail = std::to_string(kTrials) + " instances (n <= " + std::to_string(max_n) + ", tie credit 0.5), " +
               std::to_string(failures) + " mismatches";
    return o;
}

Outcome corruption_identities() {
    std::mt19937_64 rng(60);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int failures = 0, checked = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int size = 8 + static_cast<int>(rng() % 57);
        Image img({3, size, size});
        for (auto& v : img.values()) v = static_cast<float>(unit(rng));
        for (CorruptionKind k : all_corruptions()) {
            const Image out = corrupt(img, CorruptionSpec::neutral(k), rng());
            ++checked;
            if (out.shape() != img.shape() || std::memcmp(out.data(), img.data(), img.numel() * sizeof(float)) != 0)
                ++failures;
        }
    }
    std::vector<double> radii;
    for (int i = 0; i <= 100; ++i) radii.push_back(0.1 * i);
    for (int level = 1; level <= 5; ++level)
        radii.push_back(CorruptionSpec::from_severity(CorruptionKind::DefocusBlur, level).param);
    double worst = 0.0;
    for (double r : radii) {
        double sum = 0.0;
        for (float v : disk_kernel(r)) sum += v;
        worst = std::max(worst, std::abs(sum - 1.0));
    }
    Outcome o;
    o.pass = failures == 0 && worst <= kDiskSumTolerance;
    o.detail = std::to_string(checked) + " neutral corruptions, " + std::to_string(failures) +
               " non-identical; disk kernel max |sum - 1| " + fmt("%.2e", worst) + " over " +
               std::to_string(radii.size()) + " radii (<= 1e-6)";
    return o;
}

// ---- run-based criteria ----

struct ThreadsEnv {
    explicit ThreadsEnv(const char* value) {
        if (const char* v = std::getenv("FICO_THREADS")) old = v;
        ::setenv("FICO_THREADS", value, 1);
    }
    ~ThreadsEnv() {
        if (old.empty())
            ::unsetenv("FICO_THREADS");
        else
            ::setenv("FICO_THREADS", old.c_str(), 1);
    }
    std::string old;
};

// Small benchmark shared by the determinism and purity checks.
RunConfig reduced_config(const fs::path& work) {
    const fs::path data = work / "reduced" / "data";
    if (!fs::exists(data / "manifest.json")) {
        SynthSpec s;
        s.train_per_category = 16;
        s.test_good_per_category = 8;
        s.test_defect_per_category = 9;
        s.aux_per_family = 20;
        synth_dataset(7, s, data);
    }
    RunConfig cfg;
    cfg.seed = 7;
    cfg.epochs = 2;
    cfg.teacher.max_epochs = 3;
    cfg.eval.heatmaps = false;
    cfg.data.root = data.string();
    cfg.data.scenario_root = (work / "reduced" / "scenarios").string();
    return cfg;
}

Outcome determinism(const fs::path& work) {
    const RunConfig cfg = reduced_config(work);
    const fs::path a = work / "reduced" / "a", b = work / "reduced" / "b";
    fs::remove_all(a);
    fs::remove_all(b);
    {
        ThreadsEnv env("1");
        train(cfg, a / "run", log_line);
        evaluate(cfg, a / "run", a / "eval", true, log_line);
    }
    {
        ThreadsEnv env("4");
        train(cfg, b / "run", log_line);
        evaluate(cfg, b / "run", b / "eval", true, log_line);
    }
    const std::string da = sha256_file(a / "eval" / "results.json"), db = sha256_file(b / "eval" / "results.json");
    const bool scores_equal = read_file(a / "eval" / "scores.json") == read_file(b / "eval" / "scores.json");
    Outcome o;
    o.pass = da == db && scores_equal;
    o.detail = "results.json sha256 " + da.substr(0, 16) + (da == db ? " == " : " != ") + db.substr(0, 16) +
               " (1 vs 4 worker threads), scores.json " + (scores_equal ? "identical" : "different");
    return o;
}

Outcome purity_of(const RunConfig& cfg, const fs::path& run, const fs::path& out) {
    fs::remove_all(out);
    std::vector<std::string> cats;
    for (const auto& e : fs::directory_iterator(run))
        if (fs::exists(e.path() / "checkpoint" / "manifest.json")) cats.push_back(e.path().filename().string());
    std::sort(cats.begin(), cats.end());
    int filter_tensors = 0;
    for (const auto& cat : cats) {
        CheckpointReader r(run / cat / "checkpoint");
        for (const auto& n : r.names()) filter_tensors += n.rfind("diifi.", 0) == 0;
        copy_checkpoint_without(run / cat / "checkpoint", out / "stripped" / cat / "checkpoint", "diifi.");
    }
    const EvalResult full = evaluate(cfg, run, out / "full", true, log_line);
    const EvalResult stripped = evaluate(cfg, out / "stripped", out / "stripped_eval", true, log_line);
    const bool same = read_file(out / "full" / "scores.json") == read_file(out / "stripped_eval" / "scores.json");
    int filter_reads = 0;
    for (const auto& [cat, names] : full.access_log.items())
        for (const auto& n : names) filter_reads += n.get<std::string>().rfind("diifi.", 0) == 0;
    Outcome o;
    o.pass = same && filter_reads == 0 && filter_tensors > 0;
    o.detail = std::to_string(cats.size()) + " checkpoints with " + std::to_string(filter_tensors) +
               " filter tensors; scores " + (same ? "identical" : "different") + " with them removed, " +
               std::to_string(filter_reads) + " filter tensors read";
    return o;
}

Outcome purity(const fs::path& work, bool benchmark_ran) {
    const RunConfig cfg = reduced_config(work);
    const fs::path run = work / "reduced" / "a" / "run";
    if (!fs::exists(run / "run.json")) train(cfg, run, log_line);
    Outcome o = purity_of(cfg, run, work / "reduced" / "purity");
    o.detail = "reduced run: " + o.detail;
    const fs::path bench_run = work / "benchmark" / "ablation" / "seed0" / "FICO";
    if (benchmark_ran && fs::exists(bench_run / "run.json")) {
        const RunConfig bcfg = RunConfig::load(bench_run / "run.json");
        const Outcome b = purity_of(bcfg, bench_run, work / "benchmark" / "purity");
        o.pass = o.pass && b.pass;
        o.notes.push_back("benchmark seed 0: " + b.detail);
    }
    return o;
}

Outcome benchmark(const fs::path& work) {
    const fs::path root = work / "benchmark";
    fs::remove_all(root);
    const auto t0 = Clock::now();
    const std::vector<std::uint64_t> seeds{0, 1, 2};

    RunConfig cfg;
    cfg.data.root = (root / "data").string();
    cfg.eval.heatmaps = false;
    synth_dataset(0, SynthSpec{}, cfg.data.root);
    log_line("benchmark data written");

    const fs::path abl = root / "ablation";
    const nlohmann::json report =
        ablate(cfg, {Mode::GNL, Mode::DISCO, Mode::DISCO_DIIFI, Mode::FICO}, seeds, abl, log_line);

    std::vector<double> rd_id, rd_ood;
    for (std::uint64_t seed : seeds) {
        RunConfig c = cfg;
        c.mode = Mode::RD;
        c.seed = seed;
        c.teacher.path = (abl / ("seed" + std::to_string(seed)) / "teacher").string();
        c.data.scenario_root = (abl / "scenarios").string();
        const ExperimentResult e = run_experiment(c, abl / ("seed" + std::to_string(seed)) / "RD", log_line);
        rd_id.push_back(e.id_auroc());
        rd_ood.push_back(e.ood_auroc());
    }
    const double secs = seconds_since(t0);
    auto avg = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };

    const std::vector<std::string> expected{"GNL", "DISCO", "DISCO+DIIFI", "FICO"};
    std::vector<std::string> got;
    bool complete = true;
    std::map<std::string, nlohmann::json> rows;
    for (const auto& row : report.at("rows")) {
        got.push_back(row.at("mode"));
        rows[row.at("mode")] = row;
        for (const auto& s : cfg.data.scenarios) complete = complete && !row.at("scenarios").at(s).is_null();
    }
    const double fico_id = rows.at("FICO").at("scenarios").at(kIdScenario);
    const double fico_ood = rows.at("FICO").at("ood_mean");
    const double gnl_ood = rows.at("GNL").at("ood_mean");
    const double rd_ood_mean = avg(rd_ood);

    const bool a = fico_id >= kIdTarget;
    const bool b = fico_ood >= gnl_ood - kGnlMargin && fico_ood >= rd_ood_mean;
    const bool c = got == expected && complete;
    const bool t = secs < kBudgetSeconds;

    Outcome o;
    o.pass = a && b && c && t;
    o.detail = std::string("(a) ") + (a ? "ok" : "FAIL") + " (b) " + (b ? "ok" : "FAIL") + " (c) " +
               (c ? "ok" : "FAIL") + " runtime " + (t ? "ok" : "FAIL");
    o.notes.push_back("(a) FICO ID AUROC " + fmt("%.4f", fico_id) + " >= 0.90");
    o.notes.push_back("(b) FICO OOD " + fmt("%.4f", fico_ood) + " >= GNL OOD - 0.01 = " + fmt("%.4f", gnl_ood - kGnlMargin) +
                      " and >= RD OOD " + fmt("%.4f", rd_ood_mean));
    std::string order;
    for (const auto& m : got) order += (order.empty() ? "" : ", ") + m;
    o.notes.push_back("(c) ablation rows: " + order + (complete ? ", all scenario columns present" : ", missing columns"));
    o.notes.push_back("runtime " + fmt("%.1f", secs / 60.0) + " min < 30 min (3 seeds, 5 modes, shared teacher per seed)");
    o.notes.push_back("RD ID " + fmt("%.4f", avg(rd_id)) + ", OOD " + fmt("%.4f", rd_ood_mean));
    for (const auto& m : expected)
        o.notes.push_back(m + " ID " + fmt("%.4f", rows.at(m).at("scenarios").at(kIdScenario).get<double>()) + ", OOD " +
                          fmt("%.4f", rows.at(m).at("ood_mean").get<double>()));
    o.notes.push_back(std::string("strictly increasing OOD across ablation rows (logged only): ") +
                      (report.at("strictly_increasing_ood").get<bool>() ? "yes" : "no"));
    write_json_atomic(root / "summary.json", {{"fico_id", fico_id},
                                              {"fico_ood", fico_ood},
                                              {"gnl_ood", gnl_ood},
                                              {"rd_id", avg(rd_id)},
                                              {"rd_ood", rd_ood_mean},
                                              {"seconds", secs},
                                              {"pass", {{"a", a}, {"b", b}, {"c", c}, {"runtime", t}}}});
    return o;
}

std::set<int> parse_only(const std::string& csv) {
    std::set<int> out;
    std::stringstream ss(csv);
    for (std::string item; std::getline(ss, item, ',');) {
        if (item.empty()) continue;
        const int v = std::stoi(item);
        if (v < 1 || v > 9) throw ValidationError("criterion out of range: " + item);
        out.insert(v);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string work = "acceptance_work", only;
    app.add_option("--work", work, "scratch directory for datasets and runs");
    app.add_option("--only", only, "comma-separated criterion numbers (default: all)");
    CLI11_PARSE(app, argc, argv);

    std::set<int> selected;
    try {
        selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9} : parse_only(only);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    fs::create_directories(work);

    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "gradient fidelity", gradient_fidelity},
        {2, "loss invariants", loss_invariants},
        {3, "filter chain shape law", shape_law},
        {4, "EFDM exactness", efdm_exactness},
        {5, "AUROC oracle", auroc_oracle},
        {6, "corruption identities", corruption_identities},
        {7, "determinism", [&] { return determinism(work); }},
        {8, "desk-scale directional result", [&] { return benchmark(work); }},
        {9, "inference purity", [&] { return purity(work, selected.count(8) > 0); }},
    };

    int passed = 0, failed = 0;
    for (const auto& c : criteria) {
        if (!selected.count(c.id)) continue;
        log_line("criterion " + std::to_string(c.id) + ": " + c.name);
        Outcome o;
        const auto t0 = Clock::now();
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        std::printf("[%s] C%d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                    seconds_since(t0));
        for (const auto& n : o.notes) std::printf("       %s\n", n.c_str());
        std::fflush(stdout);
        (o.pass ? passed : failed)++;
    }
    std::printf("%d passed, %d failed\n", passed, failed);
    return failed == 0 ? 0 : 1;
}
