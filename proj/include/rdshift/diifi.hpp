// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "rdshift/model.hpp"

namespace rdshift {

inline constexpr double kBatchNormEps = 1e-5;

// Training-only chain I_2..I_K. Block I_k is a stride-2 3x3 convolution that
// doubles channels, followed by batch norm and relu. Output k has the shape of
// pyramid level k.
template <typename T>
class FilterChain {
public:
    // base_channels and levels describe the chain input C and depth K.
    FilterChain(int base_channels, int levels, ParamStore<T>& store, Initializer& init);

    int levels() const { return levels_; }
    // Returns K-1 maps; element j holds f_{j+2}. Each block consumes the previous output.
    std::vector<Var<T>> transform(const Var<T>& base) const;

private:
    struct Block {
        Var<T> weight, bias, gamma, beta;
    };
    int base_channels_;
    int levels_;
    std::vector<Block> blocks_;
};

// Sum over levels 2..K of the element-mean squared error, original view plus every augmented view.
template <typename T>
Var<T> loss_mse(const std::vector<Var<T>>& signals_orig, const std::vector<Var<T>>& chain_orig,
                const std::vector<std::vector<Var<T>>>& signals_views,
                const std::vector<std::vector<Var<T>>>& chain_views);

// Sum over views of the flattened cosine distance between C_1 signals.
template <typename T>
Var<T> loss_nor(const Var<T>& base_orig, const std::vector<Var<T>>& base_views);

}  // namespace rdshift
