// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

// Invariants of the variance decomposition over generated datasets.

#include <algorithm>
#include <cmath>
#include <random>

#include "catch_amalgamated.hpp"
#include "test_support.hpp"
#include "wmprobe/decomposition.hpp"

using namespace wmprobe;

namespace {

template <class F>
NestedDataset map_values(NestedDataset d, F f) {
    for (auto& intent : d.intents)
        for (auto& cell : intent.prompts)
            for (double& v : cell.values) v = f(v);
    return d;
}

bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

}  // namespace

TEST_CASE("shares sum to one and stay in [0,1]") {
    std::mt19937_64 g(101);
    for (int c = 0; c < 1000; ++c) {
        const auto d = testutil::random_dataset(g);
        const auto r = stats::decompose_variance(d);
        INFO("case " << c);
        REQUIRE(close(r.ps + r.as_share + r.mu, 1.0, 1e-9));
        for (double s : {r.ps, r.as_share, r.mu}) {
            REQUIRE(s >= 0.0);
            REQUIRE(s <= 1.0);
        }
        if (r.mvs) {
            REQUIRE(*r.mvs >= 0.0);
            REQUIRE(*r.mvs <= 1.0);
        }
    }
}

TEST_CASE("matches term-by-term enumeration on small datasets") {
    std::mt19937_64 g(202);
    const testutil::Shape small{2, 3, 1, 3, 1, 4};
    for (int c = 0; c < 200; ++c) {
        const auto d = testutil::random_dataset(g, small);
        const auto r = stats::decompose_variance(d);
        const auto bf = testutil::brute_force(d);
        INFO("case " << c);
        REQUIRE(close(r.total_variance, bf.total, 1e-12));
        REQUIRE(close(r.ps_raw, bf.ps, 1e-12));
        REQUIRE(close(r.as_raw, bf.as, 1e-12));
        REQUIRE(close(r.mu_raw, bf.mu, 1e-12));
    }
}

TEST_CASE("raw components add up to the total variance") {
    std::mt19937_64 g(303);
    for (int c = 0; c < 300; ++c) {
        const auto r = stats::decompose_variance(testutil::random_dataset(g));
        REQUIRE(close(r.ps_raw + r.as_raw + r.mu_raw, r.total_variance, 1e-9 * r.total_variance));
    }
}

TEST_CASE("shares are invariant to scale, shift and standardization") {
    std::mt19937_64 g(404);
    for (int c = 0; c < 200; ++c) {
        const auto d = testutil::random_dataset(g);
        const auto base = stats::decompose_variance(d);
        const double a = 0.01 + static_cast<double>(g() % 10000) / 100.0;
        const double b = static_cast<double>(g() % 2000) - 1000.0;
        const auto scaled = stats::decompose_variance(map_values(d, [&](double v) { return a * v; }));
        const auto shifted = stats::decompose_variance(map_values(d, [&](double v) { return v + b; }));
        const auto z = stats::decompose_variance(stats::standardize(d));
        INFO("case " << c << " a=" << a << " b=" << b);
        for (const auto* r : {&scaled, &shifted, &z}) {
            REQUIRE(close(r->ps, base.ps, 1e-9));
            REQUIRE(close(r->as_share, base.as_share, 1e-9));
            REQUIRE(close(r->mu, base.mu, 1e-9));
        }
        REQUIRE(close(z.total_variance, 1.0, 1e-9));
    }
}

TEST_CASE("shares are invariant to reordering intents, prompts and observations") {
    std::mt19937_64 g(505);
    for (int c = 0; c < 200; ++c) {
        const auto d = testutil::random_dataset(g);
        auto p = d;
        std::shuffle(p.intents.begin(), p.intents.end(), g);
        for (auto& intent : p.intents) {
            std::shuffle(intent.prompts.begin(), intent.prompts.end(), g);
            for (auto& cell : intent.prompts) std::shuffle(cell.values.begin(), cell.values.end(), g);
        }
        const auto a = stats::decompose_variance(d);
        const auto b = stats::decompose_variance(p);
        REQUIRE(close(a.ps, b.ps, 1e-9));
        REQUIRE(close(a.as_share, b.as_share, 1e-9));
        REQUIRE(close(a.mu, b.mu, 1e-9));
    }
}

TEST_CASE("duplicating every observation leaves the decomposition unchanged") {
    std::mt19937_64 g(606);
    for (int c = 0; c < 100; ++c) {
        const auto d = testutil::random_dataset(g);
        auto twice = d;
        for (auto& intent : twice.intents)
            for (auto& cell : intent.prompts) {
                const auto copy = cell.values;
                cell.values.insert(cell.values.end(), copy.begin(), copy.end());
            }
        const auto a = stats::decompose_variance(d);
        const auto b = stats::decompose_variance(twice);
        REQUIRE(close(a.total_variance, b.total_variance, 1e-9 * a.total_variance));
        REQUIRE(close(a.ps, b.ps, 1e-9));
        REQUIRE(close(a.as_share, b.as_share, 1e-9));
    }
}

TEST_CASE("constant cells carry no model uncertainty") {
    std::mt19937_64 g(707);
    for (int c = 0; c < 100; ++c) {
        auto d = testutil::random_dataset(g);
        for (auto& intent : d.intents)
            for (auto& cell : intent.prompts) std::fill(cell.values.begin(), cell.values.end(), cell.values.front());
        // Force dispersion across intents.
        for (auto& v : d.intents[1].prompts[0].values) v += 50.0;
        const auto r = stats::decompose_variance(d);
        REQUIRE(r.mu_raw <= 1e-20 * r.total_variance);
        REQUIRE(close(r.ps + r.as_share, 1.0, 1e-9));
    }
}
