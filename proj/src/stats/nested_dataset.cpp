// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "wmprobe/nested_dataset.hpp"

#include <cmath>

#include "wmprobe/error.hpp"

namespace wmprobe {

std::size_t NestedDataset::n_prompts() const noexcept {
    std::size_t n = 0;
    for (const auto& intent : intents) n += intent.prompts.size();
    return n;
}

std::size_t NestedDataset::n_obs() const noexcept {
    std::size_t n = 0;
    for (const auto& intent : intents)
        for (const auto& cell : intent.prompts) n += cell.size();
    return n;
}

void NestedDataset::validate() const {
    if (intents.size() < 2)
        throw Error(Errc::InvalidDataset, "need at least 2 intents, got " + std::to_string(intents.size()));
    for (const auto& intent : intents) {
        if (intent.prompts.empty())
            throw Error(Errc::InvalidDataset, "intent '" + intent.intent_id + "' has no prompts");
        for (const auto& cell : intent.prompts) {
            const std::string where = "cell (" + intent.intent_id + ", " + cell.prompt_id + ")";
            if (mode == DatasetMode::Numeric) {
                if (!cell.labels.empty())
                    throw Error(Errc::InvalidDataset, where + " has labels in a numeric dataset");
                if (cell.values.empty()) throw Error(Errc::InvalidDataset, where + " is empty");
                for (double v : cell.values)
                    if (!std::isfinite(v)) throw Error(Errc::InvalidDataset, where + " holds a non-finite value");
            } else {
                if (!cell.values.empty())
                    throw Error(Errc::InvalidDataset, where + " has numeric values in a categorical dataset");
                if (cell.labels.empty()) throw Error(Errc::InvalidDataset, where + " is empty");
            }
        }
    }
}

}  // namespace wmprobe
