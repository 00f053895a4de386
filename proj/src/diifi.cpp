// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "rdshift/diifi.hpp"

#include "rdshift/losses.hpp"

namespace rdshift {

template <typename T>
FilterChain<T>::FilterChain(int base_channels, int levels, ParamStore<T>& store, Initializer& init)
    : base_channels_(base_channels), levels_(levels) {
    if (base_channels < 1 || levels < 2) throw ValidationError("filter chain needs C >= 1 and K >= 2");
    for (int k = 2; k <= levels; ++k) {
        const int in = base_channels << (k - 2);
        const int out = 2 * in;
        const std::string name = "diifi.k" + std::to_string(k);
        Block b;
        b.weight = store.add(name + ".conv.weight", init.kaiming<T>({out, in, 3, 3}, in * 9));
        b.bias = store.add(name + ".conv.bias", Tensor<T>({out}));
        b.gamma = store.add(name + ".bn.weight", Tensor<T>({out}, T(1)));
        b.beta = store.add(name + ".bn.bias", Tensor<T>({out}));
        blocks_.push_back(b);
    }
}

template <typename T>
std::vector<Var<T>> FilterChain<T>::transform(const Var<T>& base) const {
    const Shape& s = base.shape();
    if (s.size() != 4 || s[1] != base_channels_)
        throw ShapeError("filter chain expects " + std::to_string(base_channels_) + " input channels, got " +
                         shape_str(s));
    const int divisor = 1 << (levels_ - 1);
    if (s[2] % divisor != 0 || s[3] % divisor != 0)
        throw ShapeError("filter chain input " + shape_str(s) + " not divisible by " + std::to_string(divisor));
    std::vector<Var<T>> out;
    Var<T> x = base;
    for (const auto& b : blocks_) {
        x = ops::relu(ops::batch_norm(ops::conv2d(x, b.weight, b.bias, 2, 1), b.gamma, b.beta, T(kBatchNormEps)));
        out.push_back(x);
    }
    return out;
}

template <typename T>
Var<T> loss_mse(const std::vector<Var<T>>& signals_orig, const std::vector<Var<T>>& chain_orig,
                const std::vector<std::vector<Var<T>>>& signals_views,
                const std::vector<std::vector<Var<T>>>& chain_views) {
    if (signals_orig.size() != chain_orig.size() || signals_orig.empty())
        throw ShapeError("loss_mse: level count mismatch");
    if (signals_views.size() != chain_views.size()) throw ShapeError("loss_mse: view count mismatch");
    std::vector<Var<T>> terms;
    auto add_level_terms = [&](const std::vector<Var<T>>& a, const std::vector<Var<T>>& b) {
        if (a.size() != signals_orig.size() || b.size() != signals_orig.size())
            throw ShapeError("loss_mse: level count mismatch");
        for (std::size_t k = 0; k < a.size(); ++k) terms.push_back(ops::mse(a[k], b[k]));
    };
    add_level_terms(signals_orig, chain_orig);
    for (std::size_t n = 0; n < signals_views.size(); ++n) add_level_terms(signals_views[n], chain_views[n]);
    return ops::weighted_sum(terms, std::vector<T>(terms.size(), T(1)));
}

template <typename T>
Var<T> loss_nor(const Var<T>& base_orig, const std::vector<Var<T>>& base_views) {
    if (base_views.empty()) throw ValidationError("loss_nor: at least one view is required");
    std::vector<Var<T>> terms;
    for (const auto& v : base_views) {
        require_same_shape(base_orig.shape(), v.shape(), "loss_nor");
        terms.push_back(cosine_flat(base_orig, v));
    }
    return ops::weighted_sum(terms, std::vector<T>(terms.size(), T(1)));
}

template class FilterChain<float>;
template class FilterChain<double>;
template Var<float> loss_mse(const std::vector<Var<float>>&, const std::vector<Var<float>>&,
                             const std::vector<std::vector<Var<float>>>&, const std::vector<std::vector<Var<float>>>&);
template Var<double> loss_mse(const std::vector<Var<double>>&, const std::vector<Var<double>>&,
                              const std::vector<std::vector<Var<double>>>&,
                              const std::vector<std::vector<Var<double>>>&);
template Var<float> loss_nor(const Var<float>&, const std::vector<Var<float>>&);
template Var<double> loss_nor(const Var<double>&, const std::vector<Var<double>>&);

}  // namespace rdshift
