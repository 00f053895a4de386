// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rdshift/tensor.hpp"

namespace rdshift {

namespace fs = std::filesystem;

// Writes to a sibling temporary file and renames it over `path`. Parent
// directories are created.
void write_file_atomic(const fs::path& path, std::string_view bytes);
void write_json_atomic(const fs::path& path, const nlohmann::json& j);
std::string read_file(const fs::path& path);
nlohmann::json read_json(const fs::path& path);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const fs::path& path);

// Images are C x H x W float tensors in [0, 1]; C is 3 (RGB) or 1 (gray).
using Image = Tensor<float>;

Image read_png(const fs::path& path);   // always returns 3 channels
Image read_mask(const fs::path& path);  // 1 channel, values 0 or 1
std::string encode_png(const Image& img);
void write_png(const fs::path& path, const Image& img);

// Round-to-nearest 8-bit quantization used by encode_png.
inline float quantize8(float v) { return static_cast<float>(static_cast<int>(std::clamp(v, 0.0f, 1.0f) * 255.0f + 0.5f)) / 255.0f; }

// Sorted list of *.png files in `dir` (non-recursive).
std::vector<fs::path> list_pngs(const fs::path& dir);

}  // namespace rdshift
