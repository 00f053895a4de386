// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

// Corruption parameters per severity level 1..5. Changing any value changes
// every materialized scenario dataset, so bump the version with it.
#pragma once

#include <array>

namespace rdshift::severity {

inline constexpr const char* kTableVersion = "rdshift-severity-v1";

inline constexpr std::array<double, 5> kBrightnessDelta{0.1, 0.2, 0.3, 0.4, 0.5};
inline constexpr std::array<double, 5> kContrastFactor{0.4, 0.3, 0.2, 0.1, 0.05};
inline constexpr std::array<double, 5> kDefocusRadius{1.0, 1.5, 2.0, 2.5, 3.0};
inline constexpr std::array<double, 5> kNoiseSigma{0.08, 0.12, 0.18, 0.26, 0.38};

}  // namespace rdshift::severity
