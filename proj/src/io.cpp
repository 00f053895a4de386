// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "rdshift/io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>
#include <unistd.h>

#include "rdshift/errors.hpp"

namespace rdshift {

void write_file_atomic(const fs::path& path, std::string_view bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    static std::atomic<unsigned> counter{0};
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw RuntimeFailure("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw RuntimeFailure("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_json_atomic(const fs::path& path, const nlohmann::json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw RuntimeFailure("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

namespace {

struct Decoded {
    int width = 0, height = 0, channels = 0;
    std::vector<png_byte> pixels;
};

Decoded decode(const fs::path& path, png_uint_32 format) {
    const std::string bytes = read_file(path);
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw ValidationError(path.string() + ": " + image.message);
    image.format = format;
    Decoded d;
    d.width = static_cast<int>(image.width);
    d.height = static_cast<int>(image.height);
    d.channels = static_cast<int>(PNG_IMAGE_PIXEL_CHANNELS(format));
    d.pixels.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, d.pixels.data(), 0, nullptr)) {
        png_image_free(&image);
        throw ValidationError(path.string() + ": " + image.message);
    }
    return d;
}

}  // namespace

Image read_png(const fs::path& path) {
    const Decoded d = decode(path, PNG_FORMAT_RGB);
    Image img({3, d.height, d.width});
    const std::size_t plane = static_cast<std::size_t>(d.height) * d.width;
    for (std::size_t i = 0; i < plane; ++i)
        for (int c = 0; c < 3; ++c) img[c * plane + i] = static_cast<float>(d.pixels[i * 3 + c]) / 255.0f;
    return img;
}

Image read_mask(const fs::path& path) {
    const Decoded d = decode(path, PNG_FORMAT_GRAY);
    Image img({1, d.height, d.width});
    for (std::size_t i = 0; i < img.numel(); ++i) img[i] = d.pixels[i] >= 128 ? 1.0f : 0.0f;
    return img;
}

std::string encode_png(const Image& img) {
    if (img.rank() != 3 || (img.dim(0) != 1 && img.dim(0) != 3))
        throw ShapeError("encode_png expects 1 x H x W or 3 x H x W, got " + shape_str(img.shape()));
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    std::vector<png_byte> pixels(plane * C);
    for (std::size_t i = 0; i < plane; ++i)
        for (int c = 0; c < C; ++c)
            pixels[i * C + c] = static_cast<png_byte>(std::lround(quantize8(img[c * plane + i]) * 255.0f));
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(W);
    image.height = static_cast<png_uint_32>(H);
    image.format = C == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr))
        throw RuntimeFailure(std::string("png encode: ") + image.message);
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr))
        throw RuntimeFailure(std::string("png encode: ") + image.message);
    out.resize(size);
    return out;
}

void write_png(const fs::path& path, const Image& img) { write_file_atomic(path, encode_png(img)); }

std::vector<fs::path> list_pngs(const fs::path& dir) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace rdshift
