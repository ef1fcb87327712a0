// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "wmprobe/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "wmprobe/error.hpp"

namespace wmprobe::stats {
namespace {

constexpr double kMvsEpsilon = 1e-12;

double clamp_share(double x) { return std::clamp(x, 0.0, 1.0); }

void require_numeric(const NestedDataset& d) {
    d.validate();
    if (d.mode != DatasetMode::Numeric)
        throw Error(Errc::InvalidDataset, "operation requires a numeric dataset");
}

bool all_identical(const NestedDataset& d) {
    const double first = d.intents.front().prompts.front().values.front();
    for (const auto& intent : d.intents)
        for (const auto& cell : intent.prompts)
            for (double v : cell.values)
                if (v != first) return false;
    return true;
}

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

// Entropy in bits of a histogram with total count n.
double entropy_bits(const std::map<std::string, std::size_t>& counts, std::size_t n) {
    if (n == 0) return 0.0;
    const double total = static_cast<double>(n);
    double h = 0.0;
    for (const auto& [label, c] : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / total;
        h -= p * std::log2(p);
    }
    return h;
}

}  // namespace

NestedDataset standardize(const NestedDataset& d) {
    require_numeric(d);
    if (all_identical(d)) throw Error(Errc::ZeroDispersion, "all values identical; cannot standardize");

    double sum = 0.0;
    for (const auto& intent : d.intents)
        for (const auto& cell : intent.prompts)
            for (double v : cell.values) sum += v;
    const double n = static_cast<double>(d.n_obs());
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& intent : d.intents)
        for (const auto& cell : intent.prompts)
            for (double v : cell.values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / n);
    if (!(sd > 0.0)) throw Error(Errc::ZeroDispersion, "pooled standard deviation is zero");

    NestedDataset out = d;
    for (auto& intent : out.intents)
        for (auto& cell : intent.prompts)
            for (double& v : cell.values) v /= sd;
    return out;
}

VarianceDecomposition decompose_variance(const NestedDataset& d) {
    require_numeric(d);
    if (all_identical(d)) throw Error(Errc::ZeroDispersion, "all values identical; total variance is zero");

    const std::size_t n_obs = d.n_obs();
    const double n = static_cast<double>(n_obs);

    // Cell and intent means, weighted by observation counts.
    std::vector<std::vector<double>> cell_means(d.intents.size());
    std::vector<double> intent_means(d.intents.size());
    std::vector<double> intent_counts(d.intents.size());
    double grand_sum = 0.0;
    for (std::size_t i = 0; i < d.intents.size(); ++i) {
        double intent_sum = 0.0;
        double intent_n = 0.0;
        for (const auto& cell : d.intents[i].prompts) {
            const double m = mean_of(cell.values);
            cell_means[i].push_back(m);
            intent_sum += m * static_cast<double>(cell.values.size());
            intent_n += static_cast<double>(cell.values.size());
        }
        intent_means[i] = intent_sum / intent_n;
        intent_counts[i] = intent_n;
        grand_sum += intent_sum;
    }
    const double grand_mean = grand_sum / n;

    double ps_ss = 0.0;
    double as_ss = 0.0;
    double mu_ss = 0.0;
    double total_ss = 0.0;
    for (std::size_t i = 0; i < d.intents.size(); ++i) {
        const double di = intent_means[i] - grand_mean;
        ps_ss += intent_counts[i] * di * di;
        const auto& prompts = d.intents[i].prompts;
        for (std::size_t p = 0; p < prompts.size(); ++p) {
            const double m = cell_means[i][p];
            const double dp = m - intent_means[i];
            as_ss += static_cast<double>(prompts[p].values.size()) * dp * dp;
            for (double v : prompts[p].values) {
                mu_ss += (v - m) * (v - m);
                total_ss += (v - grand_mean) * (v - grand_mean);
            }
        }
    }

    VarianceDecomposition r;
    r.n_intents = d.n_intents();
    r.n_prompts = d.n_prompts();
    r.n_obs = n_obs;
    r.total_variance = total_ss / n;
    r.ps_raw = ps_ss / n;
    r.as_raw = as_ss / n;
    r.mu_raw = mu_ss / n;
    if (!(r.total_variance > 0.0)) throw Error(Errc::ZeroDispersion, "total variance is zero");

    r.ps = clamp_share(r.ps_raw / r.total_variance);
    r.as_share = clamp_share(r.as_raw / r.total_variance);
    r.mu = clamp_share(r.mu_raw / r.total_variance);
    if (r.ps + r.as_share >= kMvsEpsilon) r.mvs = r.ps / (r.ps + r.as_share);
    return r;
}

double mvs(double ps, double as_share) {
    if (ps < 0.0 || as_share < 0.0)
        throw Error(Errc::InvalidArgument, "shares must be non-negative");
    const double denom = ps + as_share;
    if (denom < kMvsEpsilon) throw Error(Errc::Undefined, "MVS undefined when ps + as_share is zero");
    return ps / denom;
}

EntropyDecomposition decompose_entropy(const NestedDataset& d) {
    d.validate();
    if (d.mode != DatasetMode::Categorical)
        throw Error(Errc::InvalidDataset, "entropy decomposition requires a categorical dataset");

    const std::size_t n_obs = d.n_obs();
    const double n = static_cast<double>(n_obs);

    std::map<std::string, std::size_t> marginal;
    double h_given_intent = 0.0;         // H(v | I)
    double h_given_intent_prompt = 0.0;  // H(v | p, I)
    for (const auto& intent : d.intents) {
        std::map<std::string, std::size_t> intent_counts;
        std::size_t intent_n = 0;
        for (const auto& cell : intent.prompts) {
            std::map<std::string, std::size_t> cell_counts;
            for (const auto& label : cell.labels) {
                ++cell_counts[label];
                ++intent_counts[label];
                ++marginal[label];
            }
            intent_n += cell.labels.size();
            h_given_intent_prompt += static_cast<double>(cell.labels.size()) / n * entropy_bits(cell_counts, cell.labels.size());
        }
        h_given_intent += static_cast<double>(intent_n) / n * entropy_bits(intent_counts, intent_n);
    }
    const double h_total = entropy_bits(marginal, n_obs);
    if (marginal.size() < 2) throw Error(Errc::ZeroDispersion, "all labels identical; total entropy is zero");

    EntropyDecomposition r;
    r.n_intents = d.n_intents();
    r.n_prompts = d.n_prompts();
    r.n_obs = n_obs;
    r.total_entropy = h_total;
    r.ps_info = std::max(0.0, h_total - h_given_intent);
    r.as_info = std::max(0.0, h_given_intent - h_given_intent_prompt);
    r.mu_entropy = std::max(0.0, h_given_intent_prompt);
    r.normalized = {r.ps_info / h_total, r.as_info / h_total, r.mu_entropy / h_total};
    for (auto& s : r.normalized) s = std::clamp(s, 0.0, 1.0);
    return r;
}

}  // namespace wmprobe::stats
