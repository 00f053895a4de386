// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <cmath>
#include <numeric>

#include "rdshift/harness.hpp"

namespace rdshift {

namespace {

void say(const Logger& log, const std::string& msg) {
    if (log) log(msg);
}

// Seeded Fisher-Yates permutation of [0, n).
std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    return order;
}

nlohmann::json model_json(const ModelConfig& m) {
    return {{"base_channels", m.base_channels}, {"levels", m.levels},           {"image_size", m.image_size},
            {"disco_blocks", m.disco_blocks},   {"dyconv_kernels", m.dyconv_kernels},
            {"attention_ratio", m.attention_ratio}, {"aux_classes", m.aux_classes}};
}

void require_teacher_matches(const CheckpointReader& reader, const ModelConfig& m) {
    const nlohmann::json& meta = reader.meta();
    if (meta.value("kind", "") != "teacher") throw ValidationError("not a teacher checkpoint: " + reader.dir().string());
    for (const char* key : {"base_channels", "levels", "image_size", "aux_classes"})
        if (meta.at("model").at(key) != model_json(m).at(key))
            throw ValidationError(std::string("teacher checkpoint ") + reader.dir().string() + " was built with a different " +
                                  key);
}

void check_finite(const LossBreakdown& b, const std::string& where) {
    const std::pair<const char*, const std::optional<double>*> parts[] = {
        {"l_rd", &b.l_rd},   {"l_abs", &b.l_abs}, {"l_lowf", &b.l_lowf}, {"l_co", &b.l_co},
        {"l_mse", &b.l_mse}, {"l_nor", &b.l_nor}, {"l_fi", &b.l_fi}};
    for (const auto& [name, v] : parts)
        if (*v && !std::isfinite(**v)) throw RuntimeFailure("non-finite " + std::string(name) + " " + where);
    if (!std::isfinite(b.total)) throw RuntimeFailure("non-finite total " + where);
}

constexpr std::uint64_t kShuffleStream = 0x5348;
constexpr std::uint64_t kTeacherStream = 0x7465;

}  // namespace

// ---- Adam ----

Adam::Adam(std::vector<Var<float>> params, const AdamConfig& cfg) : params_(std::move(params)), cfg_(cfg) {
    cfg_.validate();
    for (const auto& p : params_) {
        m_.emplace_back(p.numel(), 0.0f);
        v_.emplace_back(p.numel(), 0.0f);
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

void Adam::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const float b1 = static_cast<float>(cfg_.beta1), b2 = static_cast<float>(cfg_.beta2);
    const float step = static_cast<float>(cfg_.learning_rate / c1);
    const float eps = static_cast<float>(cfg_.epsilon);
    const float inv_c2 = static_cast<float>(1.0 / c2);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Var<float>& p = params_[i];
        if (!p.has_grad()) continue;
        const float* g = p.grad().data();
        float* w = p.mutable_value().data();
        float* m = m_[i].data();
        float* v = v_[i].data();
        for (std::size_t j = 0; j < p.numel(); ++j) {
            m[j] = b1 * m[j] + (1.0f - b1) * g[j];
            v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
            w[j] -= step * m[j] / (std::sqrt(v[j] * inv_c2) + eps);
        }
    }
}

// ---- teacher ----

TeacherResult build_teacher(const RunConfig& cfg, const fs::path& out_dir, const Logger& log) {
    const auto start = std::chrono::steady_clock::now();
    const AuxSet aux = open_aux(cfg.data.root);
    if (static_cast<int>(aux.classes.size()) != cfg.model.aux_classes)
        throw ValidationError("auxiliary set has " + std::to_string(aux.classes.size()) + " classes, model expects " +
                              std::to_string(cfg.model.aux_classes));
    const int S = cfg.model.image_size;
    std::vector<Image> images;
    for (const auto& f : aux.files) images.push_back(load_image(f, S));

    ParamStore<float> store;
    Initializer init(derive_seed(cfg.seed, {kTeacherStream}));
    TeacherNet<float> teacher(cfg.model, store, init);
    Adam opt(store.trainable(), cfg.teacher.optimizer);
    const int B = cfg.teacher.batch_size;

    auto batch_of = [&](const std::vector<std::size_t>& idx, std::size_t from, std::size_t to) {
        std::vector<Image> imgs;
        std::vector<int> labels;
        for (std::size_t i = from; i < to; ++i) {
            imgs.push_back(images[idx[i]]);
            labels.push_back(aux.labels[idx[i]]);
        }
        return std::make_pair(Var<float>(stack_images(imgs, S)), labels);
    };

    TeacherResult r;
    r.history = nlohmann::json::array();
    std::vector<std::size_t> all(images.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (int epoch = 0; epoch < cfg.teacher.max_epochs; ++epoch) {
        const auto order = permutation(images.size(), derive_seed(cfg.seed, {kTeacherStream, kShuffleStream, static_cast<std::uint64_t>(epoch)}));
        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t from = 0; from < order.size(); from += B) {
            auto [x, labels] = batch_of(order, from, std::min(order.size(), from + B));
            opt.zero_grad();
            const Var<float> loss = ops::cross_entropy(teacher.classify(teacher.encode(x)), labels);
            if (!std::isfinite(loss.item()))
                throw RuntimeFailure("non-finite teacher loss at epoch " + std::to_string(epoch));
            loss.backward();
            opt.step();
            loss_sum += loss.item();
            ++batches;
        }
        int correct = 0;
        for (std::size_t from = 0; from < all.size(); from += B) {
            auto [x, labels] = batch_of(all, from, std::min(all.size(), from + B));
            const Tensor<float> logits = teacher.classify(teacher.encode(x)).value();
            const int C = logits.dim(1);
            for (std::size_t n = 0; n < labels.size(); ++n) {
                const float* row = logits.data() + n * C;
                correct += static_cast<int>(std::max_element(row, row + C) - row) == labels[n];
            }
        }
        r.accuracy = static_cast<double>(correct) / images.size();
        r.epochs = epoch + 1;
        r.history.push_back({{"epoch", epoch}, {"loss", loss_sum / batches}, {"accuracy", r.accuracy}});
        say(log, "teacher epoch " + std::to_string(epoch) + " loss " + std::to_string(loss_sum / batches) +
                     " accuracy " + std::to_string(r.accuracy));
        if (r.accuracy >= cfg.teacher.target_accuracy) break;
    }
    if (r.accuracy < cfg.teacher.target_accuracy)
        say(log, "teacher stopped at the epoch budget below the target accuracy");

    teacher.freeze(store);
    r.dir = out_dir;
    r.digest = params_digest(store, "teacher.");
    const nlohmann::json meta{{"kind", "teacher"},
                              {"seed", cfg.seed},
                              {"model", model_json(cfg.model)},
                              {"classes", aux.classes},
                              {"accuracy", r.accuracy},
                              {"epochs", r.epochs},
                              {"history", r.history},
                              {"digest", r.digest},
                              {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
    save_checkpoint(out_dir, export_params(store, "teacher."), meta);
    return r;
}

fs::path resolve_teacher(const RunConfig& cfg, const fs::path& run_dir, const Logger& log) {
    if (!cfg.teacher.path.empty()) {
        const fs::path p = cfg.teacher.path;
        CheckpointReader reader(p);
        require_teacher_matches(reader, cfg.model);
        return p;
    }
    const fs::path p = run_dir / "teacher";
    if (fs::exists(p / "manifest.json")) {
        CheckpointReader reader(p);
        require_teacher_matches(reader, cfg.model);
        if (reader.meta().at("seed") == cfg.seed) return p;
    }
    say(log, "building teacher in " + p.string());
    build_teacher(cfg, p, log);
    return p;
}

// ---- training ----

TrainResult train_category(const RunConfig& cfg, const CategorySplit& split, const fs::path& teacher_dir,
                           const fs::path& out_dir, const Logger& log) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const int S = cfg.model.image_size;
    AnomalyNetwork<float> net(cfg.model, cfg.mode, cfg.seed);
    CheckpointReader teacher_ckpt(teacher_dir);
    require_teacher_matches(teacher_ckpt, cfg.model);
    load_params(teacher_ckpt, net.params(), "teacher.");

    TrainResult r;
    r.category = split.name;
    r.teacher_digest_before = params_digest(net.params(), "teacher.");

    std::vector<Image> images;
    const std::size_t count = cfg.data.max_train_images > 0
                                  ? std::min(split.train.size(), static_cast<std::size_t>(cfg.data.max_train_images))
                                  : split.train.size();
    for (std::size_t i = 0; i < count; ++i) images.push_back(load_image(split.train[i], S));

    const ModeFlags f = flags(cfg.mode);
    Adam opt(net.params().trainable(), cfg.optimizer);
    AugmentPolicy policy = cfg.augment;
    r.trajectory = nlohmann::json::array();
    const std::size_t B = static_cast<std::size_t>(cfg.batch_size);
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = permutation(images.size(), derive_seed(cfg.seed, {kShuffleStream, static_cast<std::uint64_t>(epoch)}));
        policy.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(epoch)});
        for (std::size_t from = 0; from < order.size(); from += B, ++step) {
            const std::size_t to = std::min(order.size(), from + B);
            std::vector<Image> batch;
            std::vector<std::vector<Image>> per_view(f.views ? static_cast<std::size_t>(policy.views) : 0);
            for (std::size_t i = from; i < to; ++i) {
                batch.push_back(images[order[i]]);
                if (!f.views) continue;
                auto v = make_views(images[order[i]], policy, order[i]);
                for (std::size_t n = 0; n < v.size(); ++n) per_view[n].push_back(std::move(v[n]));
            }
            std::vector<Var<float>> views;
            for (const auto& v : per_view) views.emplace_back(stack_images(v, S));

            opt.zero_grad();
            const StepOutputs<float> out = net.objective(Var<float>(stack_images(batch, S)), views, cfg.weights);
            check_finite(out.breakdown, "at epoch " + std::to_string(epoch) + " step " + std::to_string(step) +
                                            " (" + split.name + ", " + to_string(cfg.mode) + ")");
            out.total.backward();
            opt.step();
            nlohmann::json row = out.breakdown.to_json();
            row["epoch"] = epoch;
            row["step"] = step;
            r.trajectory.push_back(row);
        }
        say(log, split.name + " " + to_string(cfg.mode) + " epoch " + std::to_string(epoch) + " total " +
                     std::to_string(r.trajectory.back()["total"].get<double>()));
    }

    r.teacher_digest_after = params_digest(net.params(), "teacher.");
    if (r.teacher_digest_after != r.teacher_digest_before)
        throw RuntimeFailure("teacher weights changed during training of " + split.name);

    StyleBankBuilder bank;
    for (const auto& img : images)
        bank.add(net.teacher().encode(Var<float>(stack_images({img}, S))).level(1).value());

    NamedTensors tensors = export_params(net.params());
    tensors.emplace_back("tta.style_bank", bank.build(cfg.eval.tta_lambda).as_tensor());
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const nlohmann::json meta{{"kind", "anomaly"},
                              {"mode", to_string(cfg.mode)},
                              {"category", split.name},
                              {"seed", cfg.seed},
                              {"model", model_json(cfg.model)},
                              {"zero_init_compensation", cfg.model.zero_init_compensation},
                              {"config", cfg.to_json()},
                              {"config_digest", cfg.digest()},
                              {"teacher_digest", r.teacher_digest_after},
                              {"train_images", images.size()},
                              {"steps", step}};
    r.checkpoint = out_dir / "checkpoint";
    save_checkpoint(r.checkpoint, tensors, meta);
    write_json_atomic(out_dir / "trajectory.json", r.trajectory);
    say(log, split.name + " " + to_string(cfg.mode) + " trained in " + std::to_string(r.seconds) + " s");
    return r;
}

std::vector<TrainResult> train(const RunConfig& cfg, const fs::path& run_dir, const Logger& log) {
    cfg.validate();
    const DatasetLayout layout = DatasetLayout::open(cfg.data.root, cfg.data.categories);
    std::vector<CategorySplit> splits;
    for (const auto& c : layout.categories()) splits.push_back(layout.split(c));
    const fs::path teacher = resolve_teacher(cfg, run_dir, log);
    write_json_atomic(run_dir / "run.json", cfg.to_json());
    std::vector<TrainResult> out;
    for (const auto& s : splits) out.push_back(train_category(cfg, s, teacher, run_dir / s.name, log));
    return out;
}

}  // namespace rdshift
