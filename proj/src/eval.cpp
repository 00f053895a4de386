// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "rdshift/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "rdshift/ops.hpp"

namespace rdshift {

void ScoringConfig::validate() const {
    if (!(smooth_sigma >= 0.0) || !std::isfinite(smooth_sigma)) throw ValidationError("smooth_sigma must be >= 0");
    if (top_k < 0) throw ValidationError("top_k must be >= 0");
}

namespace {

int reflect(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
}

template <typename T>
void require_map(const Tensor<T>& map, const char* what) {
    if (map.rank() != 2 || map.empty()) throw ShapeError(std::string(what) + ": expected a non-empty H x W map, got " +
                                                         shape_str(map.shape()));
}

}  // namespace

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& map, int out_h, int out_w) {
    require_map(map, "resize_bilinear");
    if (out_h <= 0 || out_w <= 0) throw ShapeError("resize_bilinear: output size must be positive");
    const int in_h = map.dim(0), in_w = map.dim(1);
    if (in_h == out_h && in_w == out_w) return map;

    struct Tap {
        int i0, i1;
        double f;
    };
    auto taps = [](int in, int out) {
        std::vector<Tap> t(static_cast<std::size_t>(out));
        const double scale = static_cast<double>(in) / out;
        for (int o = 0; o < out; ++o) {
            const double src = std::max(0.0, (o + 0.5) * scale - 0.5);
            const int i0 = std::min(static_cast<int>(src), in - 1);
            t[o] = {i0, std::min(i0 + 1, in - 1), src - i0};
        }
        return t;
    };
    const auto ty = taps(in_h, out_h), tx = taps(in_w, out_w);
    Tensor<T> out({out_h, out_w});
    for (int y = 0; y < out_h; ++y) {
        const T* r0 = map.data() + static_cast<std::size_t>(ty[y].i0) * in_w;
        const T* r1 = map.data() + static_cast<std::size_t>(ty[y].i1) * in_w;
        for (int x = 0; x < out_w; ++x) {
            const Tap& h = tx[x];
            const double top = (1.0 - h.f) * r0[h.i0] + h.f * r0[h.i1];
            const double bot = (1.0 - h.f) * r1[h.i0] + h.f * r1[h.i1];
            out[static_cast<std::size_t>(y) * out_w + x] = static_cast<T>((1.0 - ty[y].f) * top + ty[y].f * bot);
        }
    }
    return out;
}

template <typename T>
Tensor<T> smooth_gaussian(const Tensor<T>& map, double sigma) {
    require_map(map, "smooth_gaussian");
    if (!(sigma >= 0.0)) throw ValidationError("smooth_gaussian: sigma must be >= 0");
    if (sigma == 0.0) return map;
    const int half = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * half + 1));
    double total = 0.0;
    for (int i = -half; i <= half; ++i) total += k[i + half] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    for (double& v : k) v /= total;

    const int H = map.dim(0), W = map.dim(1);
    std::vector<double> tmp(map.numel());
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int d = -half; d <= half; ++d) acc += k[d + half] * map[static_cast<std::size_t>(y) * W + reflect(x + d, W)];
            tmp[static_cast<std::size_t>(y) * W + x] = acc;
        }
    const auto [lo_it, hi_it] = std::minmax_element(map.values().begin(), map.values().end());
    const T lo = *lo_it, hi = *hi_it;
    Tensor<T> out(map.shape());
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int d = -half; d <= half; ++d) acc += k[d + half] * tmp[static_cast<std::size_t>(reflect(y + d, H)) * W + x];
            out[static_cast<std::size_t>(y) * W + x] = std::clamp(static_cast<T>(acc), lo, hi);
        }
    return out;
}

template <typename T>
std::vector<AnomalyMap<T>> anomaly_map(const FeaturePyramid<T>& teacher, const FeaturePyramid<T>& student,
                                       int out_h, int out_w, double smooth_sigma) {
    if (teacher.size() != student.size() || teacher.size() == 0)
        throw ShapeError("anomaly_map: level count mismatch " + std::to_string(teacher.size()) + " vs " +
                         std::to_string(student.size()));
    for (std::size_t k = 0; k < teacher.size(); ++k) {
        require_same_shape(teacher.levels[k].shape(), student.levels[k].shape(), "anomaly_map");
        if (teacher.levels[k].value().rank() != 4) throw ShapeError("anomaly_map: levels must be N x C x H x W");
    }
    const int batch = teacher.levels[0].dim(0);
    std::vector<AnomalyMap<T>> maps(static_cast<std::size_t>(batch));
    for (int n = 0; n < batch; ++n) {
        Tensor<T> sum({out_h, out_w});
        for (std::size_t k = 0; k < teacher.size(); ++k) {
            const Tensor<T>& a = teacher.levels[k].value();
            const Tensor<T>& b = student.levels[k].value();
            const int C = a.dim(1), H = a.dim(2), W = a.dim(3);
            Tensor<T> dist({H, W});
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    double dot = 0.0, na = 0.0, nb = 0.0;
                    for (int c = 0; c < C; ++c) {
                        const double x = a.at(n, c, h, w), y = b.at(n, c, h, w);
                        dot += x * y;
                        na += x * x;
                        nb += y * y;
                    }
                    dist[static_cast<std::size_t>(h) * W + w] =
                        static_cast<T>(1.0 - dot / std::max(std::sqrt(na) * std::sqrt(nb), ops::kCosineEps));
                }
            Tensor<T> up = resize_bilinear(dist, out_h, out_w);
            for (std::size_t i = 0; i < sum.numel(); ++i) sum[i] += up[i];
            maps[n].levels.push_back(std::move(up));
        }
        maps[n].values = smooth_gaussian(sum, smooth_sigma);
    }
    return maps;
}

template <typename T>
double image_score(const Tensor<T>& map, int top_k) {
    if (map.empty()) throw ValidationError("image_score: empty map");
    if (top_k < 0) throw ValidationError("image_score: top_k must be >= 0");
    if (top_k == 0) return *std::max_element(map.values().begin(), map.values().end());
    std::vector<T> v(map.values().begin(), map.values().end());
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(top_k), v.size());
    std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(), std::greater<T>());
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += v[i];
    return s / static_cast<double>(k);
}

AurocCounts auroc_counts(const std::vector<ScoredSample>& samples) {
    std::vector<std::pair<double, int>> v;
    v.reserve(samples.size());
    AurocCounts c;
    for (const auto& s : samples) {
        if (s.label != 0 && s.label != 1) throw ValidationError("auroc: label must be 0 or 1 for " + s.id);
        if (std::isnan(s.score)) throw ValidationError("auroc: NaN score for " + s.id);
        v.emplace_back(s.score, s.label);
        (s.label ? c.positives : c.negatives) += 1;
    }
    if (c.positives == 0 || c.negatives == 0)
        throw ValidationError("auroc is undefined without both normal and anomalous samples");
    std::sort(v.begin(), v.end());
    std::uint64_t negatives_below = 0;
    for (std::size_t i = 0; i < v.size();) {
        std::size_t j = i;
        std::uint64_t pos = 0, neg = 0;
        for (; j < v.size() && v[j].first == v[i].first; ++j) (v[j].second ? pos : neg) += 1;
        c.twice_wins += pos * (2 * negatives_below + neg);
        negatives_below += neg;
        i = j;
    }
    return c;
}

double auroc(const std::vector<ScoredSample>& samples) { return auroc_counts(samples).value(); }

// ---- report ----

void ResultsTable::set(const std::string& category, const std::string& scenario, std::optional<double> value) {
    if (std::find(categories.begin(), categories.end(), category) == categories.end()) categories.push_back(category);
    if (std::find(scenarios.begin(), scenarios.end(), scenario) == scenarios.end()) scenarios.push_back(scenario);
    auroc[category][scenario] = value;
}

std::optional<double> ResultsTable::get(const std::string& category, const std::string& scenario) const {
    auto row = auroc.find(category);
    if (row == auroc.end()) return std::nullopt;
    auto cell = row->second.find(scenario);
    return cell == row->second.end() ? std::nullopt : cell->second;
}

namespace {

std::optional<double> mean_of(const std::vector<std::optional<double>>& xs) {
    double s = 0.0;
    int n = 0;
    for (const auto& x : xs)
        if (x) {
            s += *x;
            ++n;
        }
    if (n == 0) return std::nullopt;
    return s / n;
}

std::string fmt(std::optional<double> v) {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return buf;
}

}  // namespace

std::optional<double> ResultsTable::row_mean(const std::string& category) const {
    std::vector<std::optional<double>> xs;
    for (const auto& s : scenarios) xs.push_back(get(category, s));
    return mean_of(xs);
}

std::optional<double> ResultsTable::column_mean(const std::string& scenario) const {
    std::vector<std::optional<double>> xs;
    for (const auto& c : categories) xs.push_back(get(c, scenario));
    return mean_of(xs);
}

std::optional<double> ResultsTable::overall_mean() const {
    std::vector<std::optional<double>> xs;
    for (const auto& c : categories) xs.push_back(row_mean(c));
    return mean_of(xs);
}

nlohmann::json ResultsTable::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& c : categories) {
        nlohmann::json row = nlohmann::json::object();
        for (const auto& s : scenarios) {
            const auto v = get(c, s);
            row[s] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
        }
        j[c] = row;
    }
    return j;
}

ResultsTable ResultsTable::from_json(const nlohmann::json& j, const std::vector<std::string>& scenario_order,
                                     const std::vector<std::string>& category_order) {
    if (!j.is_object()) throw ValidationError("results table must be a JSON object");
    ResultsTable t;
    t.scenarios = scenario_order;
    for (const auto& c : category_order)
        if (j.contains(c)) t.categories.push_back(c);
    for (const auto& [cat, row] : j.items()) {
        if (!row.is_object()) throw ValidationError("results row '" + cat + "' must be an object");
        if (std::find(t.categories.begin(), t.categories.end(), cat) == t.categories.end()) t.categories.push_back(cat);
        for (const auto& [scen, v] : row.items()) {
            if (!v.is_null() && !v.is_number()) throw ValidationError("results cell must be a number or null");
            t.set(cat, scen, v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
        }
    }
    return t;
}

std::string ResultsTable::to_csv() const {
    std::ostringstream os;
    os << "category";
    for (const auto& s : scenarios) os << ',' << s;
    os << ",average\n";
    for (const auto& c : categories) {
        os << c;
        for (const auto& s : scenarios) os << ',' << fmt(get(c, s));
        os << ',' << fmt(row_mean(c)) << '\n';
    }
    os << "average";
    for (const auto& s : scenarios) os << ',' << fmt(column_mean(s));
    os << ',' << fmt(overall_mean()) << '\n';
    return os.str();
}

nlohmann::json score_histogram(const std::vector<ScoredSample>& samples, int bins) {
    if (bins <= 0) throw ValidationError("histogram needs at least one bin");
    double lo = 0.0, hi = 1.0;
    if (!samples.empty()) {
        auto [mn, mx] = std::minmax_element(samples.begin(), samples.end(),
                                            [](const auto& a, const auto& b) { return a.score < b.score; });
        lo = mn->score;
        hi = mx->score > lo ? mx->score : lo + 1.0;
    }
    std::vector<int> normal(static_cast<std::size_t>(bins)), anomalous(static_cast<std::size_t>(bins));
    std::vector<double> edges;
    for (int i = 0; i <= bins; ++i) edges.push_back(lo + (hi - lo) * i / bins);
    nlohmann::json raw_normal = nlohmann::json::array(), raw_anomalous = nlohmann::json::array();
    for (const auto& s : samples) {
        const int b = std::clamp(static_cast<int>((s.score - lo) / (hi - lo) * bins), 0, bins - 1);
        (s.label ? anomalous : normal)[b] += 1;
        (s.label ? raw_anomalous : raw_normal).push_back(s.score);
    }
    return {{"edges", edges},
            {"normal", normal},
            {"anomalous", anomalous},
            {"scores", {{"normal", raw_normal}, {"anomalous", raw_anomalous}}}};
}

ResultsTable write_report(const fs::path& dir, const std::vector<std::string>& categories,
                          const std::vector<std::string>& scenarios,
                          const std::map<std::string, std::vector<ScoredSample>>& samples) {
    ResultsTable table;
    table.categories = categories;
    table.scenarios = scenarios;
    std::map<std::string, std::vector<ScoredSample>> by_scenario;
    nlohmann::json scores = nlohmann::json::object();
    for (const auto& cat : categories) {
        auto it = samples.find(cat);
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& scen : scenarios) {
            std::vector<ScoredSample> group;
            if (it != samples.end())
                for (const auto& s : it->second)
                    if (s.scenario == scen) group.push_back(s);
            std::optional<double> value;
            if (!group.empty()) value = auroc(group);
            table.set(cat, scen, value);
            for (const auto& s : group) {
                rows.push_back({{"id", s.id}, {"score", s.score}, {"label", s.label}, {"scenario", s.scenario}});
                by_scenario[scen].push_back(s);
            }
        }
        scores[cat] = rows;
    }
    write_json_atomic(dir / "results.json", table.to_json());
    write_file_atomic(dir / "results.csv", table.to_csv());
    write_json_atomic(dir / "scores.json", scores);
    for (const auto& scen : scenarios) {
        nlohmann::json h = score_histogram(by_scenario[scen]);
        h["scenario"] = scen;
        write_json_atomic(dir / "hist" / (scen + ".json"), h);
    }
    return table;
}

void write_heatmap(const fs::path& path, const Tensor<float>& map, double scale) {
    require_map(map, "write_heatmap");
    if (!(scale > 0.0)) throw ValidationError("heatmap scale must be positive");
    Image img({1, map.dim(0), map.dim(1)});
    for (std::size_t i = 0; i < map.numel(); ++i)
        img[i] = static_cast<float>(std::clamp(map[i] / scale, 0.0, 1.0));
    write_png(path, img);
}

template Tensor<float> resize_bilinear(const Tensor<float>&, int, int);
template Tensor<double> resize_bilinear(const Tensor<double>&, int, int);
template Tensor<float> smooth_gaussian(const Tensor<float>&, double);
template Tensor<double> smooth_gaussian(const Tensor<double>&, double);
template std::vector<AnomalyMap<float>> anomaly_map(const FeaturePyramid<float>&, const FeaturePyramid<float>&, int,
                                                    int, double);
template std::vector<AnomalyMap<double>> anomaly_map(const FeaturePyramid<double>&, const FeaturePyramid<double>&,
                                                     int, int, double);
template double image_score(const Tensor<float>&, int);
template double image_score(const Tensor<double>&, int);

}  // namespace rdshift
