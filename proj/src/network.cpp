// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "rdshift/network.hpp"

namespace rdshift {

template <typename T>
AnomalyNetwork<T>::AnomalyNetwork(const ModelConfig& cfg, Mode mode, std::uint64_t seed, bool with_filter)
    : cfg_(cfg), mode_(mode) {
    cfg_.validate();
    Initializer init(seed);
    teacher_ = std::make_unique<TeacherNet<T>>(cfg_, params_, init);
    teacher_->freeze(params_);
    bottleneck_ = std::make_unique<Bottleneck<T>>(cfg_, params_, init);
    student_ = std::make_unique<StudentNet<T>>(cfg_, params_, init);
    const ModeFlags f = flags(mode);
    if (f.compensation) disco_ = std::make_unique<DiscoStack<T>>(cfg_, params_, init);
    if (f.filter && with_filter) filter_ = std::make_unique<FilterChain<T>>(cfg_.channels(1), cfg_.levels, params_, init);
}

template <typename T>
FeaturePyramid<T> AnomalyNetwork<T>::reconstruct(const FeaturePyramid<T>& teacher_pyramid) const {
    FeaturePyramid<T> student = student_->decode((*bottleneck_)(teacher_pyramid));
    return disco_ ? disco_->compensate(student) : student;
}

template <typename T>
StepOutputs<T> AnomalyNetwork<T>::objective(const Var<T>& images, const std::vector<Var<T>>& views,
                                            const LossWeights& w) const {
    const ModeFlags f = flags(mode_);
    if (f.views && views.empty()) throw ValidationError("mode " + to_string(mode_) + " needs augmented views");
    StepOutputs<T> out;
    out.terms = compute_terms(images, f.views ? views : std::vector<Var<T>>{}, w, f.rd, f.normality);
    out.total = out.terms.assemble(mode_, w);
    out.breakdown = out.terms.breakdown(mode_, out.total);
    return out;
}

template <typename T>
LossTerms<T> AnomalyNetwork<T>::all_terms(const Var<T>& images, const std::vector<Var<T>>& views,
                                          const LossWeights& w) const {
    if (views.empty()) throw ValidationError("all_terms needs augmented views");
    return compute_terms(images, views, w, true, true);
}

template <typename T>
LossTerms<T> AnomalyNetwork<T>::compute_terms(const Var<T>& images, const std::vector<Var<T>>& views,
                                              const LossWeights& w, bool with_rd, bool with_nor) const {
    const ModeFlags f{!views.empty(), with_rd, disco_ != nullptr, filter_ != nullptr, with_nor};
    LossTerms<T> terms;

    const FeaturePyramid<T> t_orig = teacher_->encode(images);
    const Var<T> phi_orig = (*bottleneck_)(t_orig);
    const FeaturePyramid<T> d_orig = student_->decode(phi_orig);

    std::vector<FeaturePyramid<T>> t_views;
    std::vector<Var<T>> phi_views;
    std::vector<FeaturePyramid<T>> d_views;
    if (f.views) {
        for (const auto& v : views) {
            t_views.push_back(teacher_->encode(v));
            phi_views.push_back((*bottleneck_)(t_views.back()));
            d_views.push_back(student_->decode(phi_views.back()));
        }
        terms.l_abs = loss_abs(phi_orig, phi_views);
        std::vector<Var<T>> d1_views;
        for (const auto& d : d_views) d1_views.push_back(d.levels.front());
        terms.l_lowf = loss_lowf(d_orig.levels.front(), d1_views);
    }
    if (f.rd) terms.l_rd = loss_rd(t_orig, d_orig);

    if (f.compensation && f.views) {
        const int K = cfg_.levels;
        auto signals_of = [&](const FeaturePyramid<T>& d) {
            std::vector<Var<T>> s;
            for (int k = 1; k <= K; ++k) s.push_back(disco_->signal(d.level(k), k));
            return s;
        };
        auto compensated = [](const FeaturePyramid<T>& d, const std::vector<Var<T>>& s) {
            FeaturePyramid<T> p;
            for (std::size_t k = 0; k < s.size(); ++k) p.levels.push_back(ops::add(s[k], d.levels[k]));
            return p;
        };
        const std::vector<Var<T>> s_orig = signals_of(d_orig);
        std::vector<std::vector<Var<T>>> s_views;
        std::vector<FeaturePyramid<T>> f_views;
        for (const auto& d : d_views) {
            s_views.push_back(signals_of(d));
            f_views.push_back(compensated(d, s_views.back()));
        }
        terms.l_co = loss_co(t_orig, t_views, compensated(d_orig, s_orig), f_views, w.alpha);

        if (f.filter) {
            auto deeper = [](const std::vector<Var<T>>& s) { return std::vector<Var<T>>(s.begin() + 1, s.end()); };
            const std::vector<Var<T>> chain_orig = filter_->transform(s_orig.front());
            std::vector<std::vector<Var<T>>> sig_views, chain_views;
            for (const auto& s : s_views) {
                sig_views.push_back(deeper(s));
                chain_views.push_back(filter_->transform(s.front()));
            }
            terms.l_mse = loss_mse(deeper(s_orig), chain_orig, sig_views, chain_views);
        }
        if (f.normality) {
            std::vector<Var<T>> base_views;
            for (const auto& s : s_views) base_views.push_back(s.front());
            terms.l_nor = loss_nor(s_orig.front(), base_views);
        }
    }

    return terms;
}

template class AnomalyNetwork<float>;
template class AnomalyNetwork<double>;

}  // namespace rdshift
