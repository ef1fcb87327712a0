// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

#include "wmprobe/decomposition.hpp"

namespace wmprobe::stats {

struct Interval {
    double lower = 0.0;
    double upper = 0.0;

    friend bool operator==(const Interval&, const Interval&) = default;
};

struct BootstrapOptions {
    std::size_t replicates = 500;
    double level = 0.95;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// Percentile intervals from a stratified bootstrap. `lower <= upper` always
/// holds; the point estimate is not guaranteed to lie inside the interval.
struct BootstrapResult {
    VarianceDecomposition point;
    Interval ps;
    Interval as_share;
    Interval mu;
    std::optional<Interval> mvs;
    std::size_t replicates = 0;  // requested
    std::size_t skipped = 0;     // degenerate replicates
    double level = 0.95;
    std::uint64_t seed = 0;
};

/// Resamples observations with replacement inside every (intent, prompt)
/// cell, keeping cell sizes. Replicate r draws from a stream derived from
/// (seed, r), so the output is independent of `threads`.
BootstrapResult bootstrap(const NestedDataset& d, const BootstrapOptions& options = {});

/// Type-7 (linear interpolation) sample quantile of sorted data.
double quantile_sorted(std::span<const double> sorted, double q);

}  // namespace wmprobe::stats
