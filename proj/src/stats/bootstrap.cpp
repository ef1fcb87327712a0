// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "wmprobe/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "wmprobe/error.hpp"
#include "wmprobe/rng.hpp"

namespace wmprobe::stats {
namespace {

struct Replicate {
    bool ok = false;
    double ps = 0.0;
    double as_share = 0.0;
    double mu = 0.0;
    std::optional<double> mvs;
};

Replicate run_replicate(const NestedDataset& d, NestedDataset& scratch, std::uint64_t seed, std::size_t r) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(r)}));
    for (std::size_t i = 0; i < d.intents.size(); ++i) {
        for (std::size_t p = 0; p < d.intents[i].prompts.size(); ++p) {
            const auto& src = d.intents[i].prompts[p].values;
            auto& dst = scratch.intents[i].prompts[p].values;
            for (std::size_t k = 0; k < src.size(); ++k) dst[k] = src[rng.uniform_index(src.size())];
        }
    }
    Replicate out;
    try {
        const auto dec = decompose_variance(scratch);
        out.ok = true;
        out.ps = dec.ps;
        out.as_share = dec.as_share;
        out.mu = dec.mu;
        out.mvs = dec.mvs;
    } catch (const Error& e) {
        if (e.code() != Errc::ZeroDispersion) throw;
    }
    return out;
}

Interval percentile_interval(std::vector<double> xs, double level) {
    std::sort(xs.begin(), xs.end());
    const double alpha = (1.0 - level) / 2.0;
    return {quantile_sorted(xs, alpha), quantile_sorted(xs, 1.0 - alpha)};
}

}  // namespace

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw Error(Errc::InvalidArgument, "quantile of empty sample");
    if (sorted.size() == 1) return sorted.front();
    const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    if (frac == 0.0) return sorted[lo];
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BootstrapResult bootstrap(const NestedDataset& d, const BootstrapOptions& options) {
    if (options.replicates == 0) throw Error(Errc::InvalidArgument, "replicates must be positive");
    if (!(options.level > 0.0 && options.level < 1.0))
        throw Error(Errc::InvalidArgument, "level must lie in (0, 1)");

    BootstrapResult result;
    result.point = decompose_variance(d);
    result.replicates = options.replicates;
    result.level = options.level;
    result.seed = options.seed;

    std::vector<Replicate> reps(options.replicates);
    const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(options.replicates)));
    auto work = [&](unsigned t) {
        NestedDataset scratch = d;
        for (std::size_t r = t; r < reps.size(); r += threads) reps[r] = run_replicate(d, scratch, options.seed, r);
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    }

    std::vector<double> ps, as, mu, mv;
    for (const auto& rep : reps) {
        if (!rep.ok) {
            ++result.skipped;
            continue;
        }
        ps.push_back(rep.ps);
        as.push_back(rep.as_share);
        mu.push_back(rep.mu);
        if (rep.mvs) mv.push_back(*rep.mvs);
    }
    if (ps.empty()) throw Error(Errc::ZeroDispersion, "every bootstrap replicate was degenerate");

    result.ps = percentile_interval(std::move(ps), options.level);
    result.as_share = percentile_interval(std::move(as), options.level);
    result.mu = percentile_interval(std::move(mu), options.level);
    if (!mv.empty()) result.mvs = percentile_interval(std::move(mv), options.level);
    return result;
}

}  // namespace wmprobe::stats
