// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wmprobe/bootstrap.hpp"
#include "wmprobe/decomposition.hpp"

namespace wmprobe {

/// Mean of one (intent, prompt) cell, kept so charts never recompute it.
struct CellSummary {
    std::string intent_id;
    std::string prompt_id;
    std::size_t n = 0;
    double mean = 0.0;

    friend bool operator==(const CellSummary&, const CellSummary&) = default;
};

struct BootstrapSummary {
    std::size_t replicates = 0;
    std::size_t skipped = 0;
    double level = 0.95;
    std::uint64_t seed = 0;
    stats::Interval ps;
    stats::Interval as_share;
    stats::Interval mu;
    std::optional<stats::Interval> mvs;

    friend bool operator==(const BootstrapSummary&, const BootstrapSummary&) = default;
};

struct TaskResult {
    std::string task_id;
    std::string category;
    std::string unit;
    stats::VarianceDecomposition decomposition;
    std::optional<BootstrapSummary> bootstrap;
    std::vector<CellSummary> cells;

    friend bool operator==(const TaskResult&, const TaskResult&) = default;
};

/// Contents of results.json for one run (one model).
struct RunResults {
    std::string run_id;
    std::string model_id;
    std::vector<TaskResult> tasks;

    friend bool operator==(const RunResults&, const RunResults&) = default;
};

}  // namespace wmprobe
