// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "rdshift/config.hpp"

#include <cmath>
#include <set>

namespace rdshift {

namespace {

using json = nlohmann::json;

// Reads keys from one JSON object and rejects any key it was not asked for.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ValidationError(where_ + " must be a JSON object");
    }

    template <typename V>
    void get(const std::string& key, V& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<V>();
        } catch (const json::exception& e) {
            throw ValidationError(where_ + "." + key + ": " + e.what());
        }
    }

    const json* child(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto& [key, _] : j_.items())
            if (!seen_.count(key)) throw ValidationError("unknown config key " + where_ + "." + key);
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

void check_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string(what) + " must be positive");
}

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

void read_range(ObjectReader& r, const std::string& key, Range& out) {
    std::vector<double> v{out.lo, out.hi};
    r.get(key, v);
    if (v.size() != 2) throw ValidationError("augment." + key + " must be [lo, hi]");
    out = {v[0], v[1]};
}

void read_adam(const json* j, const std::string& where, AdamConfig& a) {
    if (!j) return;
    ObjectReader r(*j, where);
    r.get("learning_rate", a.learning_rate);
    r.get("beta1", a.beta1);
    r.get("beta2", a.beta2);
    r.get("epsilon", a.epsilon);
    r.finish();
}

json adam_json(const AdamConfig& a) {
    return {{"learning_rate", a.learning_rate}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"epsilon", a.epsilon}};
}

}  // namespace

void AdamConfig::validate() const {
    check_positive(learning_rate, "learning_rate");
    check_positive(epsilon, "epsilon");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw ValidationError("adam betas must lie in [0, 1)");
}

void TeacherConfig::validate() const {
    if (max_epochs < 1) throw ValidationError("teacher.max_epochs must be >= 1");
    if (!(target_accuracy >= 0.0 && target_accuracy <= 1.0))
        throw ValidationError("teacher.target_accuracy must lie in [0, 1]");
    if (batch_size < 1) throw ValidationError("teacher.batch_size must be >= 1");
    optimizer.validate();
}

void EvalConfig::validate() const {
    if (!(tta_lambda >= 0.0 && tta_lambda <= 1.0)) throw ValidationError("eval.tta_lambda must lie in [0, 1]");
    scoring.validate();
}

void DataConfig::validate() const {
    if (root.empty()) throw ValidationError("data.root must be set");
    if (scenarios.empty()) throw ValidationError("data.scenarios must not be empty");
    std::set<std::string> seen;
    for (const auto& s : scenarios) {
        parse_scenario(s);
        if (!seen.insert(s).second) throw ValidationError("duplicate scenario " + s);
    }
    if (max_train_images < 0) throw ValidationError("data.max_train_images must be >= 0");
}

void RunConfig::validate() const {
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    optimizer.validate();
    weights.validate();
    model.validate();
    augment.validate();
    teacher.validate();
    eval.validate();
    data.validate();
}

json RunConfig::to_json() const {
    return {
        {"schema", kRunConfigSchema},
        {"seed", seed},
        {"mode", to_string(mode)},
        {"epochs", epochs},
        {"batch_size", batch_size},
        {"optimizer", adam_json(optimizer)},
        {"weights", {{"alpha", weights.alpha}, {"beta", weights.beta}, {"gamma", weights.gamma}}},
        {"model",
         {{"base_channels", model.base_channels},
          {"levels", model.levels},
          {"image_size", model.image_size},
          {"disco_blocks", model.disco_blocks},
          {"dyconv_kernels", model.dyconv_kernels},
          {"attention_ratio", model.attention_ratio},
          {"aux_classes", model.aux_classes},
          {"zero_init_compensation", model.zero_init_compensation}}},
        {"augment",
         {{"views", augment.views},
          {"brightness", range_json(augment.brightness)},
          {"contrast", range_json(augment.contrast)},
          {"blur_sigma", range_json(augment.blur_sigma)},
          {"noise_sigma", range_json(augment.noise_sigma)}}},
        {"teacher",
         {{"path", teacher.path},
          {"max_epochs", teacher.max_epochs},
          {"target_accuracy", teacher.target_accuracy},
          {"batch_size", teacher.batch_size},
          {"optimizer", adam_json(teacher.optimizer)}}},
        {"eval",
         {{"tta_lambda", eval.tta_lambda},
          {"smooth_sigma", eval.scoring.smooth_sigma},
          {"top_k", eval.scoring.top_k},
          {"heatmaps", eval.heatmaps}}},
        {"data",
         {{"root", data.root},
          {"categories", data.categories},
          {"scenario_root", data.scenario_root},
          {"scenarios", data.scenarios},
          {"max_train_images", data.max_train_images}}},
    };
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    ObjectReader r(j, "config");
    std::string schema = kRunConfigSchema;
    r.get("schema", schema);
    if (schema != kRunConfigSchema)
        throw ValidationError("unsupported config schema '" + schema + "', expected " + kRunConfigSchema);
    r.get("seed", c.seed);
    std::string mode = to_string(c.mode);
    r.get("mode", mode);
    c.mode = parse_mode(mode);
    r.get("epochs", c.epochs);
    r.get("batch_size", c.batch_size);
    read_adam(r.child("optimizer"), "config.optimizer", c.optimizer);
    if (const json* w = r.child("weights")) {
        ObjectReader wr(*w, "config.weights");
        wr.get("alpha", c.weights.alpha);
        wr.get("beta", c.weights.beta);
        wr.get("gamma", c.weights.gamma);
        wr.finish();
    }
    if (const json* m = r.child("model")) {
        ObjectReader mr(*m, "config.model");
        mr.get("base_channels", c.model.base_channels);
        mr.get("levels", c.model.levels);
        mr.get("image_size", c.model.image_size);
        mr.get("disco_blocks", c.model.disco_blocks);
        mr.get("dyconv_kernels", c.model.dyconv_kernels);
        mr.get("attention_ratio", c.model.attention_ratio);
        mr.get("aux_classes", c.model.aux_classes);
        mr.get("zero_init_compensation", c.model.zero_init_compensation);
        mr.finish();
    }
    if (const json* a = r.child("augment")) {
        ObjectReader ar(*a, "config.augment");
        ar.get("views", c.augment.views);
        read_range(ar, "brightness", c.augment.brightness);
        read_range(ar, "contrast", c.augment.contrast);
        read_range(ar, "blur_sigma", c.augment.blur_sigma);
        read_range(ar, "noise_sigma", c.augment.noise_sigma);
        ar.finish();
    }
    if (const json* t = r.child("teacher")) {
        ObjectReader tr(*t, "config.teacher");
        tr.get("path", c.teacher.path);
        tr.get("max_epochs", c.teacher.max_epochs);
        tr.get("target_accuracy", c.teacher.target_accuracy);
        tr.get("batch_size", c.teacher.batch_size);
        read_adam(tr.child("optimizer"), "config.teacher.optimizer", c.teacher.optimizer);
        tr.finish();
    }
    if (const json* e = r.child("eval")) {
        ObjectReader er(*e, "config.eval");
        er.get("tta_lambda", c.eval.tta_lambda);
        er.get("smooth_sigma", c.eval.scoring.smooth_sigma);
        er.get("top_k", c.eval.scoring.top_k);
        er.get("heatmaps", c.eval.heatmaps);
        er.finish();
    }
    if (const json* d = r.child("data")) {
        ObjectReader dr(*d, "config.data");
        dr.get("root", c.data.root);
        dr.get("categories", c.data.categories);
        dr.get("scenario_root", c.data.scenario_root);
        dr.get("scenarios", c.data.scenarios);
        dr.get("max_train_images", c.data.max_train_images);
        dr.finish();
    }
    r.finish();
    c.validate();
    return c;
}

RunConfig RunConfig::load(const fs::path& path) {
    if (!fs::exists(path)) throw ValidationError("config file not found: " + path.string());
    return from_json(read_json(path));
}

std::string RunConfig::digest() const { return sha256_hex(to_json().dump()); }

std::optional<CorruptionSpec> parse_scenario(const std::string& name) {
    if (name == kIdScenario) return std::nullopt;
    const auto pos = name.rfind("_s");
    if (pos == std::string::npos || pos + 2 >= name.size())
        throw ValidationError("unknown scenario '" + name + "' (expected ID or <kind>_s<1..5>)");
    const std::string level = name.substr(pos + 2);
    if (level.size() != 1 || level[0] < '1' || level[0] > '5')
        throw ValidationError("scenario '" + name + "' must end in _s1 .. _s5");
    return CorruptionSpec::from_severity(parse_corruption(name.substr(0, pos)), level[0] - '0');
}

}  // namespace rdshift
