// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rdshift/model.hpp"

namespace rdshift {

// Training objective. DISCO and DISCO_DIIFI are the intermediate ablation rows.
enum class Mode { RD, GNL, DISCO, DISCO_DIIFI, FICO };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& name);  // accepts "DISCO+DIIFI" as well

struct ModeFlags {
    bool views;        // augmented views are generated
    bool rd;           // plain teacher/student alignment
    bool compensation; // DiSCo modules instantiated
    bool filter;       // DiIFi chain instantiated
    bool normality;    // L_nor active
};
ModeFlags flags(Mode mode);

struct LossWeights {
    double alpha = 0.05;
    double beta = 0.02;
    double gamma = 1.0;
    void validate() const;
};

struct LossBreakdown {
    Mode mode = Mode::FICO;
    std::optional<double> l_rd, l_abs, l_lowf, l_co, l_mse, l_nor, l_fi;
    double total = 0.0;

    nlohmann::json to_json() const;
    bool all_finite() const;
};

// Total objective for `mode` from its components. l_fi is derived from
// l_lowf/l_mse/l_nor when it is not given. Throws ValidationError when a
// component required by the mode is missing.
double total(Mode mode, const LossBreakdown& b, const LossWeights& w);

// L_Fi = l_lowf + beta * l_mse + gamma * l_nor. Throws on non-finite components.
double loss_fi(double l_lowf, double l_mse, double l_nor, double beta, double gamma);

// Mean over locations of 1 - cos between channel vectors.
template <typename T> Var<T> cosine_per_location(const Var<T>& a, const Var<T>& b);
// 1 - cos between the flattened per-sample tensors, averaged over the batch.
template <typename T> Var<T> cosine_flat(const Var<T>& a, const Var<T>& b);

// Sum over levels of the per-location cosine distance.
template <typename T> Var<T> loss_rd(const FeaturePyramid<T>& teacher, const FeaturePyramid<T>& student);
// Sum over views of the flattened cosine distance to the original embedding.
template <typename T> Var<T> loss_abs(const Var<T>& phi, const std::vector<Var<T>>& phi_views);
template <typename T> Var<T> loss_lowf(const Var<T>& d1, const std::vector<Var<T>>& d1_views);

// Differentiable counterparts of the breakdown, populated per mode.
template <typename T>
struct LossTerms {
    std::optional<Var<T>> l_rd, l_abs, l_lowf, l_co, l_mse, l_nor, l_fi;

    // Builds l_fi where the mode needs it and returns the total objective.
    Var<T> assemble(Mode mode, const LossWeights& w);
    LossBreakdown breakdown(Mode mode, const Var<T>& total) const;
};

struct GradcheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    bool finite = true;
};

struct GradcheckReport {
    std::string label;
    double tolerance = 0.0;
    double step = 0.0;
    double loss = 0.0;
    double grad_scale = 0.0;  // max(1, largest analytic |gradient| entry)
    double max_rel_error = 0.0;
    bool passed = false;
    std::vector<GradcheckEntry> params;

    nlohmann::json to_json() const;
};

// Relative-error denominators are floored at this fraction of the largest
// analytic gradient entry (at least 1), so entries whose true gradient is
// zero are judged on absolute error relative to the gradient's scale.
inline constexpr double kGradcheckFloor = 1e-5;

// Compares analytic gradients of `loss_fn` w.r.t. every named parameter with
// central differences. The loss is rebuilt for each perturbation.
GradcheckReport gradcheck(const std::function<Var<double>()>& loss_fn,
                          const std::vector<std::pair<std::string, Var<double>>>& params, double tolerance,
                          double step = 1e-5, std::string label = {});

}  // namespace rdshift
