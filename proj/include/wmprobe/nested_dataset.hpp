// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace wmprobe {

enum class DatasetMode { Numeric, Categorical };

/// Observations collected for one prompt phrasing under one intent.
/// Exactly one of `values` / `labels` is populated, matching the dataset mode.
struct PromptCell {
    std::string prompt_id;
    std::vector<double> values;
    std::vector<std::string> labels;

    std::size_t size() const noexcept { return values.empty() ? labels.size() : values.size(); }

    friend bool operator==(const PromptCell&, const PromptCell&) = default;
};

struct IntentCell {
    std::string intent_id;
    std::vector<PromptCell> prompts;

    friend bool operator==(const IntentCell&, const IntentCell&) = default;
};

/// The intent -> prompt -> observation hierarchy consumed by every
/// decomposition.
struct NestedDataset {
    DatasetMode mode = DatasetMode::Numeric;
    std::vector<IntentCell> intents;

    std::size_t n_intents() const noexcept { return intents.size(); }
    std::size_t n_prompts() const noexcept;
    std::size_t n_obs() const noexcept;

    /// Throws Error(InvalidDataset) when a structural invariant is broken:
    /// fewer than 2 intents, an intent without prompts, an empty cell, mixed
    /// numeric/categorical content or a non-finite value.
    void validate() const;

    friend bool operator==(const NestedDataset&, const NestedDataset&) = default;
};

}  // namespace wmprobe
