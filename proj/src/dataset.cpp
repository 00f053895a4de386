// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <thread>

#include "rdshift/harness.hpp"

namespace rdshift {

int worker_count() {
    if (const char* env = std::getenv("FICO_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || n < 1) throw ValidationError("FICO_THREADS must be a positive integer");
        return static_cast<int>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

std::vector<std::string> subdirs(const fs::path& dir) {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory()) out.push_back(e.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

void require_dir(const fs::path& p, const std::string& what) {
    if (!fs::is_directory(p)) throw ValidationError(what + " not found: " + p.string());
}

}  // namespace

DatasetLayout DatasetLayout::open(const fs::path& root, const std::vector<std::string>& categories) {
    require_dir(root, "dataset root");
    DatasetLayout d;
    d.root_ = root;
    if (categories.empty()) {
        for (const auto& name : subdirs(root))
            if (name != "aux") d.categories_.push_back(name);
        if (d.categories_.empty()) throw ValidationError("dataset root has no categories: " + root.string());
    } else {
        for (const auto& c : categories) require_dir(root / c, "dataset category");
        d.categories_ = categories;
    }
    return d;
}

std::vector<TestSample> DatasetLayout::test_samples(const fs::path& category_dir, const std::string& category) {
    const fs::path test = category_dir / "test";
    require_dir(test / "good", "test/good split");
    std::vector<TestSample> out;
    for (const auto& defect : subdirs(test))
        for (const auto& p : list_pngs(test / defect))
            out.push_back({p, category + "_" + defect + "_" + p.stem().string(), defect, defect == "good" ? 0 : 1});
    for (const auto& e : fs::directory_iterator(test))
        if (!e.is_directory()) throw ValidationError("unexpected file in test split: " + e.path().string());
    return out;
}

CategorySplit DatasetLayout::split(const std::string& category) const {
    const fs::path dir = root_ / category;
    require_dir(dir / "train", "train split");
    for (const auto& e : fs::directory_iterator(dir / "train"))
        if (e.path().filename() != "good")
            throw ValidationError("train split may only contain good/: found " + e.path().string());
    CategorySplit s;
    s.name = category;
    s.train = list_pngs(dir / "train" / "good");
    if (s.train.empty()) throw ValidationError("no training images in " + (dir / "train" / "good").string());
    s.test = test_samples(dir, category);
    return s;
}

AuxSet open_aux(const fs::path& dataset_root) {
    const fs::path aux = dataset_root / "aux";
    require_dir(aux, "auxiliary classification set");
    AuxSet set;
    set.classes = subdirs(aux);
    for (std::size_t c = 0; c < set.classes.size(); ++c)
        for (const auto& p : list_pngs(aux / set.classes[c])) {
            set.files.push_back(p);
            set.labels.push_back(static_cast<int>(c));
        }
    if (set.classes.size() < 2 || set.files.empty())
        throw ValidationError("auxiliary set needs at least two non-empty classes: " + aux.string());
    return set;
}

Image load_image(const fs::path& path, int size) {
    Image img = read_png(path);
    if (img.dim(1) != size || img.dim(2) != size)
        throw ValidationError("image " + path.string() + " is " + shape_str(img.shape()) + ", expected 3x" +
                              std::to_string(size) + "x" + std::to_string(size));
    return img;
}

Tensor<float> stack_images(const std::vector<Image>& images, int size) {
    Tensor<float> batch({static_cast<int>(images.size()), 3, size, size});
    const std::size_t per = static_cast<std::size_t>(3) * size * size;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i].shape() != Shape{3, size, size})
            throw ShapeError("stack_images: image " + std::to_string(i) + " is " + shape_str(images[i].shape()));
        std::copy(images[i].data(), images[i].data() + per, batch.data() + i * per);
    }
    return batch;
}

nlohmann::json corrupt_dataset(const fs::path& in_root, const fs::path& out_root, const CorruptionSpec& spec,
                               std::uint64_t seed, const std::vector<std::string>& categories) {
    spec.validate();
    const DatasetLayout layout = DatasetLayout::open(in_root, categories);
    nlohmann::json files = nlohmann::json::object();
    for (const auto& cat : layout.categories()) {
        for (const auto& s : DatasetLayout::test_samples(in_root / cat, cat)) {
            const fs::path rel = fs::relative(s.path, in_root);
            const std::uint64_t path_hash = std::stoull(sha256_hex(rel.generic_string()).substr(0, 16), nullptr, 16);
            const Image out = corrupt(read_png(s.path), spec, derive_seed(seed, {path_hash}));
            const std::string bytes = encode_png(out);
            write_file_atomic(out_root / rel, bytes);
            files[rel.generic_string()] = sha256_hex(bytes);
        }
        const fs::path gt = in_root / cat / "ground_truth";
        if (fs::is_directory(gt))
            for (const auto& e : fs::recursive_directory_iterator(gt))
                if (e.is_regular_file()) {
                    const fs::path rel = fs::relative(e.path(), in_root);
                    const std::string bytes = read_file(e.path());
                    write_file_atomic(out_root / rel, bytes);
                    files[rel.generic_string()] = sha256_hex(bytes);
                }
    }
    nlohmann::json manifest{{"source", fs::absolute(in_root).lexically_normal().string()},
                            {"spec", spec.to_json()},
                            {"scenario", spec.scenario_name()},
                            {"seed", seed},
                            {"categories", layout.categories()},
                            {"files", files}};
    write_json_atomic(out_root / "manifest.json", manifest);
    return manifest;
}

}  // namespace rdshift
