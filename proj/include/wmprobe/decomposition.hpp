// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <optional>

#include "wmprobe/nested_dataset.hpp"

namespace wmprobe::stats {

/// Law-of-total-variance split of a numeric dataset.
///
/// Raw components are in squared task units and sum to `total_variance`;
/// the shares are those components divided by the total, clamped to [0, 1].
struct VarianceDecomposition {
    double total_variance = 0.0;
    double ps_raw = 0.0;
    double as_raw = 0.0;
    double mu_raw = 0.0;
    double ps = 0.0;
    double as_share = 0.0;
    double mu = 0.0;
    std::optional<double> mvs;
    std::size_t n_intents = 0;
    std::size_t n_prompts = 0;
    std::size_t n_obs = 0;

    friend bool operator==(const VarianceDecomposition&, const VarianceDecomposition&) = default;
};

/// Chain-rule split of the plug-in label entropy, in bits.
struct EntropyDecomposition {
    double total_entropy = 0.0;
    double ps_info = 0.0;     // I(intent; label)
    double as_info = 0.0;     // E_intent[ I(prompt; label | intent) ]
    double mu_entropy = 0.0;  // E_{intent,prompt}[ H(label | prompt, intent) ]
    std::array<double, 3> normalized{0.0, 0.0, 0.0};
    std::size_t n_intents = 0;
    std::size_t n_prompts = 0;
    std::size_t n_obs = 0;
};

/// Divides every value by the pooled population standard deviation.
/// Throws ZeroDispersion when all values are identical.
NestedDataset standardize(const NestedDataset& d);

/// Every observation carries equal weight; population (1/N) denominators.
/// Throws ZeroDispersion when all values are identical, InvalidDataset when
/// the dataset is malformed or categorical.
VarianceDecomposition decompose_variance(const NestedDataset& d);

/// ps / (ps + as_share). Throws Undefined when the denominator is below 1e-12.
double mvs(double ps, double as_share);

EntropyDecomposition decompose_entropy(const NestedDataset& d);

}  // namespace wmprobe::stats
