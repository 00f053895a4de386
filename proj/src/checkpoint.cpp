// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "rdshift/checkpoint.hpp"

#include <bit>
#include <cstring>

namespace rdshift {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs are little-endian f32");

void save_checkpoint(const fs::path& dir, const NamedTensors& tensors, const nlohmann::json& meta) {
    std::string blob;
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [name, t] : tensors) {
        for (const auto& e : entries)
            if (e["name"] == name) throw ValidationError("duplicate checkpoint tensor " + name);
        entries.push_back({{"name", name}, {"shape", t.shape()}, {"offset", blob.size()}, {"count", t.numel()}});
        blob.append(reinterpret_cast<const char*>(t.data()), t.numel() * sizeof(float));
    }
    const nlohmann::json manifest{{"format", kCheckpointFormat},
                                  {"dtype", "f32"},
                                  {"endianness", "little"},
                                  {"blob", kCheckpointBlob},
                                  {"blob_bytes", blob.size()},
                                  {"blob_sha256", sha256_hex(blob)},
                                  {"tensors", entries},
                                  {"meta", meta}};
    write_file_atomic(dir / kCheckpointBlob, blob);
    write_json_atomic(dir / "manifest.json", manifest);
}

template <typename T>
NamedTensors export_params(const ParamStore<T>& store, const std::string& prefix) {
    NamedTensors out;
    for (const auto& [name, v] : store.items())
        if (name.rfind(prefix, 0) == 0) out.emplace_back(name, v.value().template cast<float>());
    return out;
}

template <typename T>
std::string params_digest(const ParamStore<T>& store, const std::string& prefix) {
    std::string bytes;
    for (const auto& [name, t] : export_params(store, prefix)) {
        bytes += name;
        bytes.push_back('\0');
        bytes.append(reinterpret_cast<const char*>(t.data()), t.numel() * sizeof(float));
    }
    return sha256_hex(bytes);
}

CheckpointReader::CheckpointReader(const fs::path& dir) : dir_(dir) {
    if (!fs::exists(dir / "manifest.json")) throw ValidationError("checkpoint not found: " + (dir / "manifest.json").string());
    manifest_ = read_json(dir / "manifest.json");
    if (manifest_.value("format", "") != kCheckpointFormat)
        throw ValidationError("unsupported checkpoint format in " + dir.string());
    if (manifest_.value("dtype", "") != "f32" || manifest_.value("endianness", "") != "little")
        throw ValidationError("checkpoint must be little-endian f32: " + dir.string());
    blob_ = read_file(dir / manifest_.at("blob").get<std::string>());
    if (blob_.size() != manifest_.at("blob_bytes").get<std::size_t>() ||
        sha256_hex(blob_) != manifest_.at("blob_sha256").get<std::string>())
        throw ValidationError("checkpoint blob digest mismatch in " + dir.string());
}

const nlohmann::json& CheckpointReader::entry(const std::string& name) const {
    for (const auto& e : manifest_.at("tensors"))
        if (e.at("name") == name) return e;
    throw ValidationError("checkpoint " + dir_.string() + " has no tensor " + name);
}

bool CheckpointReader::contains(const std::string& name) const {
    for (const auto& e : manifest_.at("tensors"))
        if (e.at("name") == name) return true;
    return false;
}

std::vector<std::string> CheckpointReader::names() const {
    std::vector<std::string> out;
    for (const auto& e : manifest_.at("tensors")) out.push_back(e.at("name"));
    return out;
}

Shape CheckpointReader::shape(const std::string& name) const { return entry(name).at("shape").get<Shape>(); }

Tensor<float> CheckpointReader::read(const std::string& name) {
    const nlohmann::json& e = entry(name);
    const std::size_t offset = e.at("offset"), count = e.at("count");
    Shape s = e.at("shape").get<Shape>();
    if (shape_numel(s) != count || offset + count * sizeof(float) > blob_.size())
        throw ValidationError("corrupt checkpoint entry " + name);
    log_.push_back(name);
    std::vector<float> data(count);
    std::memcpy(data.data(), blob_.data() + offset, count * sizeof(float));
    return Tensor<float>(std::move(s), std::move(data));
}

template <typename T>
void load_params(CheckpointReader& reader, ParamStore<T>& store, const std::string& prefix) {
    for (auto& [name, v] : store.items()) {
        if (name.rfind(prefix, 0) != 0) continue;
        const Shape s = reader.shape(name);
        if (s != v.shape())
            throw ValidationError("checkpoint tensor " + name + " has shape " + shape_str(s) + ", expected " +
                                  shape_str(v.shape()));
        Var<T> handle = v;
        handle.mutable_value() = reader.read(name).template cast<T>();
    }
}

void copy_checkpoint_without(const fs::path& src, const fs::path& dst, const std::string& prefix) {
    CheckpointReader reader(src);
    NamedTensors kept;
    for (const auto& name : reader.names())
        if (name.rfind(prefix, 0) != 0) kept.emplace_back(name, reader.read(name));
    save_checkpoint(dst, kept, reader.meta());
}

template NamedTensors export_params(const ParamStore<float>&, const std::string&);
template NamedTensors export_params(const ParamStore<double>&, const std::string&);
template std::string params_digest(const ParamStore<float>&, const std::string&);
template std::string params_digest(const ParamStore<double>&, const std::string&);
template void load_params(CheckpointReader&, ParamStore<float>&, const std::string&);
template void load_params(CheckpointReader&, ParamStore<double>&, const std::string&);

}  // namespace rdshift
