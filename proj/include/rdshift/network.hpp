// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "rdshift/diifi.hpp"
#include "rdshift/disco.hpp"
#include "rdshift/losses.hpp"
#include "rdshift/model.hpp"

namespace rdshift {

// Everything one training step produces, kept alive for backward.
template <typename T>
struct StepOutputs {
    LossTerms<T> terms;
    Var<T> total;
    LossBreakdown breakdown;
};

// Teacher, bottleneck and student, plus the compensation stack and filter
// chain when the mode uses them. Parameters are registered in that order, so
// a seed gives the same bottleneck/student initialization in every mode.
template <typename T>
class AnomalyNetwork {
public:
    // With `with_filter` false the filter chain is not instantiated even when
    // the mode trains one; that is the inference network.
    AnomalyNetwork(const ModelConfig& cfg, Mode mode, std::uint64_t seed, bool with_filter = true);

    const ModelConfig& config() const { return cfg_; }
    Mode mode() const { return mode_; }
    ParamStore<T>& params() { return params_; }
    const ParamStore<T>& params() const { return params_; }
    const TeacherNet<T>& teacher() const { return *teacher_; }
    const Bottleneck<T>& bottleneck() const { return *bottleneck_; }
    const StudentNet<T>& student() const { return *student_; }
    const DiscoStack<T>* compensation() const { return disco_.get(); }
    const FilterChain<T>* filter() const { return filter_.get(); }

    // Student pyramid for a teacher pyramid, compensated when the mode has
    // compensation modules. The filter chain is never used here.
    FeaturePyramid<T> reconstruct(const FeaturePyramid<T>& teacher_pyramid) const;

    // One step of the per-batch objective. `images` and each entry of
    // `views` are N x 3 x H x W; views may be empty only in RD mode.
    StepOutputs<T> objective(const Var<T>& images, const std::vector<Var<T>>& views, const LossWeights& w) const;

    // Every term the instantiated modules can produce, including l_rd
    // regardless of mode. Diagnostic use only; needs at least one view.
    LossTerms<T> all_terms(const Var<T>& images, const std::vector<Var<T>>& views, const LossWeights& w) const;

private:
    LossTerms<T> compute_terms(const Var<T>& images, const std::vector<Var<T>>& views, const LossWeights& w,
                               bool with_rd, bool with_nor) const;

    ModelConfig cfg_;
    Mode mode_;
    ParamStore<T> params_;
    std::unique_ptr<TeacherNet<T>> teacher_;
    std::unique_ptr<Bottleneck<T>> bottleneck_;
    std::unique_ptr<StudentNet<T>> student_;
    std::unique_ptr<DiscoStack<T>> disco_;
    std::unique_ptr<FilterChain<T>> filter_;
};

}  // namespace rdshift
