// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

// Shared helpers for the unit tests: dataset generators, an independent
// brute-force decomposition oracle, scripted chat backends, temp dirs.

#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "wmprobe/chat_backend.hpp"
#include "wmprobe/nested_dataset.hpp"

namespace testutil {

using wmprobe::NestedDataset;

// Built from explicit cell contents, e.g. {{{0, 2}, {0, 2}}, {{10, 12}, {10, 12}}}.
inline NestedDataset make_dataset(const std::vector<std::vector<std::vector<double>>>& cells) {
    NestedDataset d;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        wmprobe::IntentCell intent;
        intent.intent_id = "I" + std::to_string(i);
        for (std::size_t p = 0; p < cells[i].size(); ++p)
            intent.prompts.push_back({"P" + std::to_string(p), cells[i][p], {}});
        d.intents.push_back(std::move(intent));
    }
    return d;
}

inline NestedDataset make_labels(const std::vector<std::vector<std::vector<std::string>>>& cells) {
    NestedDataset d;
    d.mode = wmprobe::DatasetMode::Categorical;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        wmprobe::IntentCell intent;
        intent.intent_id = "I" + std::to_string(i);
        for (std::size_t p = 0; p < cells[i].size(); ++p)
            intent.prompts.push_back({"P" + std::to_string(p), {}, cells[i][p]});
        d.intents.push_back(std::move(intent));
    }
    return d;
}

struct Shape {
    std::size_t min_intents = 2, max_intents = 5;
    std::size_t min_prompts = 1, max_prompts = 20;
    std::size_t min_obs = 1, max_obs = 20;
};

// Random unbalanced dataset; values mix intent offsets, prompt offsets and
// noise so no component is trivially zero. std::mt19937_64 output is
// bit-specified, and only its raw output is used here.
inline NestedDataset random_dataset(std::mt19937_64& g, const Shape& s = {}) {
    auto pick = [&](std::size_t lo, std::size_t hi) { return lo + g() % (hi - lo + 1); };
    auto unit = [&] { return static_cast<double>(g() >> 11) * 0x1.0p-53; };
    std::vector<std::vector<std::vector<double>>> cells(pick(s.min_intents, s.max_intents));
    for (auto& intent : cells) {
        const double mi = (unit() - 0.5) * 20.0;
        intent.resize(pick(s.min_prompts, s.max_prompts));
        for (auto& cell : intent) {
            const double mp = (unit() - 0.5) * 6.0;
            cell.resize(pick(s.min_obs, s.max_obs));
            for (auto& v : cell) v = mi + mp + (unit() - 0.5) * 4.0;
        }
    }
    // Guarantee some dispersion.
    cells[0][0][0] += 1.0;
    return make_dataset(cells);
}

struct Components {
    double total, ps, as, mu;
};

// Term-by-term enumeration: for each observation, accumulate the squared
// distances grand->intent mean, intent->prompt mean, prompt mean->value.
// Means are recomputed from scratch per observation; deliberately naive.
inline Components brute_force(const NestedDataset& d) {
    std::vector<std::tuple<double, std::size_t, std::size_t>> obs;
    for (std::size_t i = 0; i < d.intents.size(); ++i)
        for (std::size_t p = 0; p < d.intents[i].prompts.size(); ++p)
            for (double v : d.intents[i].prompts[p].values) obs.emplace_back(v, i, p);
    auto mean_where = [&](auto pred) {
        long double s = 0;
        std::size_t n = 0;
        for (const auto& o : obs)
            if (pred(o)) {
                s += std::get<0>(o);
                ++n;
            }
        return static_cast<double>(s / n);
    };
    const double grand = mean_where([](const auto&) { return true; });
    long double tot = 0, ps = 0, as = 0, mu = 0;
    for (const auto& [v, i, p] : obs) {
        const double mi = mean_where([&, i = i](const auto& o) { return std::get<1>(o) == i; });
        const double mp = mean_where([&, i = i, p = p](const auto& o) { return std::get<1>(o) == i && std::get<2>(o) == p; });
        tot += (v - grand) * (v - grand);
        ps += (mi - grand) * (mi - grand);
        as += (mp - mi) * (mp - mi);
        mu += (v - mp) * (v - mp);
    }
    const long double n = static_cast<long double>(obs.size());
    return {static_cast<double>(tot / n), static_cast<double>(ps / n), static_cast<double>(as / n),
            static_cast<double>(mu / n)};
}

// Answers with a caller-supplied function; counts and logs requests.
class ScriptedBackend final : public wmprobe::ChatBackend {
public:
    using Fn = std::function<std::string(const wmprobe::ChatRequest&)>;
    explicit ScriptedBackend(Fn fn) : fn_(std::move(fn)) {}

    wmprobe::Completion complete(const wmprobe::ChatRequest& r) override {
        {
            std::lock_guard lock(mu_);
            log_.push_back(r);
        }
        return {fn_(r), "scripted"};
    }
    std::string_view kind() const noexcept override { return "scripted"; }

    std::size_t calls() const {
        std::lock_guard lock(mu_);
        return log_.size();
    }
    std::vector<wmprobe::ChatRequest> log() const {
        std::lock_guard lock(mu_);
        return log_;
    }

private:
    Fn fn_;
    mutable std::mutex mu_;
    std::vector<wmprobe::ChatRequest> log_;
};

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("wmprobe_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::filesystem::path source_dir() { return WMPROBE_SOURCE_DIR; }

}  // namespace testutil
