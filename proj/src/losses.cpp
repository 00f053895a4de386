// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "rdshift/losses.hpp"

#include <algorithm>
#include <cmath>

namespace rdshift {

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::RD: return "RD";
        case Mode::GNL: return "GNL";
        case Mode::DISCO: return "DISCO";
        case Mode::DISCO_DIIFI: return "DISCO+DIIFI";
        case Mode::FICO: return "FICO";
    }
    return "?";
}

Mode parse_mode(const std::string& name) {
    if (name == "RD") return Mode::RD;
    if (name == "GNL") return Mode::GNL;
    if (name == "DISCO") return Mode::DISCO;
    if (name == "DISCO+DIIFI" || name == "DISCO_DIIFI") return Mode::DISCO_DIIFI;
    if (name == "FICO") return Mode::FICO;
    throw ValidationError("unknown mode '" + name + "' (expected RD, GNL, DISCO, DISCO+DIIFI or FICO)");
}

ModeFlags flags(Mode mode) {
    switch (mode) {
        case Mode::RD: return {false, true, false, false, false};
        case Mode::GNL: return {true, true, false, false, false};
        case Mode::DISCO: return {true, false, true, false, false};
        case Mode::DISCO_DIIFI: return {true, false, true, true, false};
        case Mode::FICO: return {true, false, true, true, true};
    }
    return {};
}

void LossWeights::validate() const {
    for (double v : {alpha, beta, gamma})
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("loss weights must be finite and >= 0");
}

nlohmann::json LossBreakdown::to_json() const {
    nlohmann::json j;
    j["mode"] = to_string(mode);
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) j[key] = *v;
    };
    put("l_rd", l_rd);
    put("l_abs", l_abs);
    put("l_lowf", l_lowf);
    put("l_co", l_co);
    put("l_mse", l_mse);
    put("l_nor", l_nor);
    put("l_fi", l_fi);
    j["total"] = total;
    return j;
}

bool LossBreakdown::all_finite() const {
    for (const auto* v : {&l_rd, &l_abs, &l_lowf, &l_co, &l_mse, &l_nor, &l_fi})
        if (*v && !std::isfinite(**v)) return false;
    return std::isfinite(total);
}

namespace {

double need(const std::optional<double>& v, const char* name, Mode mode) {
    if (!v) throw ValidationError(std::string("loss component ") + name + " missing for mode " + to_string(mode));
    return *v;
}

}  // namespace

double loss_fi(double l_lowf, double l_mse, double l_nor, double beta, double gamma) {
    for (double v : {l_lowf, l_mse, l_nor, beta, gamma})
        if (!std::isfinite(v)) throw ValidationError("loss_fi: non-finite component");
    if (beta < 0 || gamma < 0) throw ValidationError("loss_fi: weights must be >= 0");
    return l_lowf + beta * l_mse + gamma * l_nor;
}

double total(Mode mode, const LossBreakdown& b, const LossWeights& w) {
    switch (mode) {
        case Mode::RD: return need(b.l_rd, "l_rd", mode);
        case Mode::GNL: return need(b.l_rd, "l_rd", mode) + need(b.l_abs, "l_abs", mode) + need(b.l_lowf, "l_lowf", mode);
        case Mode::DISCO:
            return need(b.l_co, "l_co", mode) + need(b.l_abs, "l_abs", mode) + need(b.l_lowf, "l_lowf", mode);
        case Mode::DISCO_DIIFI:
        case Mode::FICO: {
            double fi = 0.0;
            if (b.l_fi) {
                fi = *b.l_fi;
            } else {
                const double nor = mode == Mode::FICO ? need(b.l_nor, "l_nor", mode) : 0.0;
                fi = loss_fi(need(b.l_lowf, "l_lowf", mode), need(b.l_mse, "l_mse", mode), nor, w.beta,
                             mode == Mode::FICO ? w.gamma : 0.0);
            }
            return fi + need(b.l_abs, "l_abs", mode) + need(b.l_co, "l_co", mode);
        }
    }
    throw ValidationError("unhandled mode");
}

template <typename T>
Var<T> cosine_per_location(const Var<T>& a, const Var<T>& b) {
    return ops::cosine_distance_per_location(a, b);
}

template <typename T>
Var<T> cosine_flat(const Var<T>& a, const Var<T>& b) {
    return ops::cosine_distance_flat(a, b);
}

template <typename T>
Var<T> loss_rd(const FeaturePyramid<T>& teacher, const FeaturePyramid<T>& student) {
    if (teacher.size() != student.size() || teacher.size() == 0)
        throw ShapeError("loss_rd: pyramids have " + std::to_string(teacher.size()) + " and " +
                         std::to_string(student.size()) + " levels");
    std::vector<Var<T>> terms;
    for (std::size_t k = 0; k < teacher.size(); ++k)
        terms.push_back(cosine_per_location(teacher.levels[k], student.levels[k]));
    return ops::weighted_sum(terms, std::vector<T>(terms.size(), T(1)));
}

namespace {

template <typename T>
Var<T> view_consistency(const Var<T>& orig, const std::vector<Var<T>>& views, const char* what) {
    if (views.empty()) throw ValidationError(std::string(what) + ": at least one view is required");
    std::vector<Var<T>> terms;
    for (const auto& v : views) {
        require_same_shape(orig.shape(), v.shape(), what);
        terms.push_back(cosine_flat(orig, v));
    }
    return ops::weighted_sum(terms, std::vector<T>(terms.size(), T(1)));
}

}  // namespace

template <typename T>
Var<T> loss_abs(const Var<T>& phi, const std::vector<Var<T>>& phi_views) {
    return view_consistency(phi, phi_views, "loss_abs");
}

template <typename T>
Var<T> loss_lowf(const Var<T>& d1, const std::vector<Var<T>>& d1_views) {
    return view_consistency(d1, d1_views, "loss_lowf");
}

template <typename T>
Var<T> LossTerms<T>::assemble(Mode mode, const LossWeights& w) {
    auto need_var = [mode](const std::optional<Var<T>>& v, const char* name) -> const Var<T>& {
        if (!v) throw ValidationError(std::string("loss term ") + name + " missing for mode " + to_string(mode));
        return *v;
    };
    switch (mode) {
        case Mode::RD: return ops::weighted_sum<T>({need_var(l_rd, "l_rd")}, {T(1)});
        case Mode::GNL:
            return ops::weighted_sum<T>({need_var(l_rd, "l_rd"), need_var(l_abs, "l_abs"), need_var(l_lowf, "l_lowf")},
                                        {T(1), T(1), T(1)});
        case Mode::DISCO:
            return ops::weighted_sum<T>({need_var(l_co, "l_co"), need_var(l_abs, "l_abs"), need_var(l_lowf, "l_lowf")},
                                        {T(1), T(1), T(1)});
        case Mode::DISCO_DIIFI:
            l_fi = ops::weighted_sum<T>({need_var(l_lowf, "l_lowf"), need_var(l_mse, "l_mse")}, {T(1), T(w.beta)});
            break;
        case Mode::FICO:
            l_fi = ops::weighted_sum<T>({need_var(l_lowf, "l_lowf"), need_var(l_mse, "l_mse"), need_var(l_nor, "l_nor")},
                                        {T(1), T(w.beta), T(w.gamma)});
            break;
    }
    return ops::weighted_sum<T>({*l_fi, need_var(l_abs, "l_abs"), need_var(l_co, "l_co")}, {T(1), T(1), T(1)});
}

template <typename T>
LossBreakdown LossTerms<T>::breakdown(Mode mode, const Var<T>& total_var) const {
    LossBreakdown b;
    b.mode = mode;
    auto get = [](const std::optional<Var<T>>& v) -> std::optional<double> {
        if (!v) return std::nullopt;
        return static_cast<double>(v->item());
    };
    b.l_rd = get(l_rd);
    b.l_abs = get(l_abs);
    b.l_lowf = get(l_lowf);
    b.l_co = get(l_co);
    b.l_mse = get(l_mse);
    b.l_nor = get(l_nor);
    b.l_fi = get(l_fi);
    b.total = static_cast<double>(total_var.item());
    return b;
}

nlohmann::json GradcheckReport::to_json() const {
    nlohmann::json j;
    j["label"] = label;
    j["tolerance"] = tolerance;
    j["step"] = step;
    j["loss"] = loss;
    j["grad_scale"] = grad_scale;
    j["max_rel_error"] = max_rel_error;
    j["passed"] = passed;
    auto& ps = j["params"] = nlohmann::json::array();
    for (const auto& p : params) ps.push_back({{"name", p.name}, {"max_rel_error", p.max_rel_error}, {"finite", p.finite}});
    return j;
}

GradcheckReport gradcheck(const std::function<Var<double>()>& loss_fn,
                          const std::vector<std::pair<std::string, Var<double>>>& params, double tolerance,
                          double step, std::string label) {
    GradcheckReport report;
    report.label = std::move(label);
    report.tolerance = tolerance;
    report.step = step;
    for (const auto& [_, v] : params) Var<double>(v).zero_grad();
    const Var<double> root = loss_fn();
    root.backward();
    report.loss = root.item();
    double grad_scale = 1.0;
    for (const auto& [_, v] : params)
        if (v.has_grad())
            for (double g : v.grad().values())
                if (std::isfinite(g)) grad_scale = std::max(grad_scale, std::abs(g));
    report.grad_scale = grad_scale;
    const double floor = kGradcheckFloor * grad_scale;

    bool ok = true;
    for (const auto& [name, param] : params) {
        Var<double> v = param;
        GradcheckEntry entry{name, 0.0, true};
        const Tensor<double> analytic = v.has_grad() ? v.grad() : Tensor<double>(v.shape());
        for (std::size_t i = 0; i < v.numel(); ++i) {
            double& x = v.mutable_value()[i];
            const double saved = x;
            x = saved + step;
            const double fp = loss_fn().item();
            x = saved - step;
            const double fm = loss_fn().item();
            x = saved;
            const double numeric = (fp - fm) / (2.0 * step);
            if (!std::isfinite(numeric) || !std::isfinite(analytic[i])) {
                entry.finite = false;
                continue;
            }
            const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), floor});
            entry.max_rel_error = std::max(entry.max_rel_error, std::abs(numeric - analytic[i]) / denom);
        }
        ok = ok && entry.finite && entry.max_rel_error < tolerance;
        report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
        report.params.push_back(entry);
    }
    report.passed = ok;
    return report;
}

#define RDSHIFT_INSTANTIATE_LOSSES(T)                                                            \
    template Var<T> cosine_per_location(const Var<T>&, const Var<T>&);                           \
    template Var<T> cosine_flat(const Var<T>&, const Var<T>&);                                   \
    template Var<T> loss_rd(const FeaturePyramid<T>&, const FeaturePyramid<T>&);                 \
    template Var<T> loss_abs(const Var<T>&, const std::vector<Var<T>>&);                         \
    template Var<T> loss_lowf(const Var<T>&, const std::vector<Var<T>>&);                        \
    template struct LossTerms<T>;

RDSHIFT_INSTANTIATE_LOSSES(float)
RDSHIFT_INSTANTIATE_LOSSES(double)

}  // namespace rdshift
