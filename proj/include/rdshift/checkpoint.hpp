// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rdshift/io.hpp"
#include "rdshift/model.hpp"

namespace rdshift {

inline constexpr const char* kCheckpointFormat = "rdshift-checkpoint-v1";
inline constexpr const char* kCheckpointBlob = "weights.bin";

using NamedTensors = std::vector<std::pair<std::string, Tensor<float>>>;

// Writes dir/weights.bin (raw little-endian f32, concatenated in order) and
// dir/manifest.json (names, shapes, byte offsets, blob digest, `meta`).
// Both files are written atomically, the manifest last.
void save_checkpoint(const fs::path& dir, const NamedTensors& tensors, const nlohmann::json& meta);

template <typename T>
NamedTensors export_params(const ParamStore<T>& store, const std::string& prefix = {});

// Digest of the raw values of every parameter whose name starts with `prefix`.
template <typename T>
std::string params_digest(const ParamStore<T>& store, const std::string& prefix = {});

// Opens a checkpoint, verifies the blob digest and records every tensor read.
class CheckpointReader {
public:
    explicit CheckpointReader(const fs::path& dir);

    const fs::path& dir() const { return dir_; }
    const nlohmann::json& manifest() const { return manifest_; }
    const nlohmann::json& meta() const { return manifest_.at("meta"); }
    bool contains(const std::string& name) const;
    std::vector<std::string> names() const;
    Shape shape(const std::string& name) const;

    Tensor<float> read(const std::string& name);
    const std::vector<std::string>& access_log() const { return log_; }

private:
    const nlohmann::json& entry(const std::string& name) const;

    fs::path dir_;
    nlohmann::json manifest_;
    std::string blob_;
    std::vector<std::string> log_;
};

// Overwrites every parameter of `store` whose name starts with `prefix`
// with the checkpoint tensor of the same name. Missing names or shape
// mismatches throw ValidationError.
template <typename T>
void load_params(CheckpointReader& reader, ParamStore<T>& store, const std::string& prefix = {});

// Copy of a checkpoint without the tensors whose names start with `prefix`.
void copy_checkpoint_without(const fs::path& src, const fs::path& dst, const std::string& prefix);

}  // namespace rdshift
