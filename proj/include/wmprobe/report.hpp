// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wmprobe/bootstrap.hpp"
#include "wmprobe/nested_dataset.hpp"
#include "wmprobe/results.hpp"
#include "wmprobe/task_spec.hpp"

namespace wmprobe::report {

/// Decomposition, optional bootstrap and per-cell means of one task.
TaskResult summarize_task(const TaskSpec& task, const NestedDataset& d,
                          const std::optional<stats::BootstrapOptions>& bootstrap = std::nullopt);

/// "%.2e", e.g. 23500 -> "2.35e+04".
std::string format_variance(double v);

/// "0.947 / 0.006 / 0.048".
std::string format_shares(double ps, double as_share, double mu);

/// Fixed-width text table, one block per (task, model): the point row
/// followed by an interval row when bootstrap intervals exist. Empty input
/// yields the header alone.
std::string render_table(std::span<const RunResults> runs);

/// One row per (task, model). Numbers are the shortest round-trip decimal of
/// the stored value; absent values are empty fields.
std::string render_csv(std::span<const RunResults> runs);

/// Shortest round-trip decimal of `x`.
std::string format_exact(double x);

struct CategoryAverage {
    std::string model_id;
    std::string category;
    std::size_t n_tasks = 0;
    double ps = 0.0;
    double as_share = 0.0;
    double mu = 0.0;
    std::optional<double> mvs;  // mean of the tasks' defined MVS values
};

/// Unweighted means over each category's tasks, per model. Ordered by
/// category then by model in input order.
std::vector<CategoryAverage> category_averages(std::span<const RunResults> runs);

/// Silverman's rule 0.9 * min(sd, IQR / 1.34) * n^(-1/5); falls back to sd
/// when the IQR is zero and returns 0 for constant data.
double silverman_bandwidth(std::span<const double> values);

struct KdeCurve {
    std::string intent_id;
    std::string prompt_id;
    double bandwidth = 0.0;
    double mean = 0.0;  // from the stored cell summary
    std::vector<double> xs;
    std::vector<double> density;  // empty when bandwidth is 0 (point mass at `mean`)
};

/// Gaussian KDE of `values` evaluated on `grid`.
std::vector<double> gaussian_kde(std::span<const double> values, double bandwidth, std::span<const double> grid);

/// Curves for every (intent, prompt) cell over a shared grid of `points`.
std::vector<KdeCurve> kde_curves(const TaskResult& result, const NestedDataset& d, std::size_t points = 200);

std::string shares_svg(std::span<const CategoryAverage> averages);
std::string mvs_svg(std::span<const CategoryAverage> averages);
std::string kde_svg(const TaskResult& result, std::span<const KdeCurve> curves);

std::string shares_csv(std::span<const CategoryAverage> averages);
std::string kde_csv(std::span<const KdeCurve> curves);

/// Writes report.txt, report.csv, shares.svg/.csv, mvs.svg/.csv and, for every
/// task with a dataset in `datasets` (keyed by task id, first run only),
/// kde_<task>.svg/.csv. Returns the written paths in write order.
std::vector<std::filesystem::path> write_report(const std::filesystem::path& out_dir, std::span<const RunResults> runs,
                                                const std::map<std::string, NestedDataset>& datasets);

}  // namespace wmprobe::report
