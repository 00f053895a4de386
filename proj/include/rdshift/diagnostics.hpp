// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "rdshift/losses.hpp"
#include "rdshift/model.hpp"

namespace rdshift {

// K=2, C0=2, 8x8 input, batch 2, one augmented view, DiSCo initialized
// randomly so every module contributes gradient.
ModelConfig tiny_gradcheck_config();

struct TinyGradcheckResult {
    std::uint64_t requested_seed = 0;
    std::uint64_t network_seed = 0;  // first seed at or after the request whose features are non-degenerate
    double tolerance = 0.0;
    double seconds = 0.0;
    bool passed = false;
    std::vector<GradcheckReport> reports;  // l_rd, l_abs, l_lowf, l_co, l_mse, l_nor, total
    nlohmann::json to_json() const;
};

// Gradient check of every loss component and of the full FICO objective
// w.r.t. all trainable parameters, at 64-bit. Network seeds whose teacher or
// student maps are constant over space are skipped.
TinyGradcheckResult run_tiny_gradcheck(std::uint64_t seed, double tolerance = 1e-4);

}  // namespace rdshift
