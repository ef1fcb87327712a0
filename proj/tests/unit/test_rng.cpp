// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <set>
#include <vector>

#include "catch_amalgamated.hpp"
#include "wmprobe/rng.hpp"

using namespace wmprobe;

TEST_CASE("mix64 reference values") {
    // splitmix64 outputs for a zero state: the first three calls.
    CHECK(mix64(0) == 0xe220a8397b1dcdafULL);
    CHECK(mix64(0x9e3779b97f4a7c15ULL) == 0x6e789e6aa1b965f4ULL);
    CHECK(mix64(0x3c6ef372fe94f82aULL) == 0x06c45d188009454fULL);
}

TEST_CASE("hash_string is FNV-1a 64") {
    static_assert(hash_string("") == 0xcbf29ce484222325ULL);
    CHECK(hash_string("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(hash_string("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("derive_seed separates paths") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 8; ++s)
        for (std::uint64_t a = 0; a < 8; ++a)
            for (std::uint64_t b = 0; b < 8; ++b) seen.insert(derive_seed(s, {a, b}));
    CHECK(seen.size() == 512);
    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
    CHECK(derive_seed(1, {}) != derive_seed(1, {0}));
    CHECK(derive_seed(9, {4}) == derive_seed(9, {4}));
}

TEST_CASE("Rng is reproducible from its seed") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
    }
    CHECK(Rng(42).next_u64() != Rng(43).next_u64());
}

TEST_CASE("uniform_index is unbiased and in range") {
    Rng r(7);
    std::vector<int> counts(6, 0);
    const int n = 60000;
    for (int i = 0; i < n; ++i) {
        const auto k = r.uniform_index(6);
        REQUIRE(k < 6);
        ++counts[k];
    }
    // Chi-square with 5 dof; 20.5 is the 0.999 quantile.
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - n / 6.0) * (c - n / 6.0) / (n / 6.0);
    CHECK(chi2 < 20.5);
    CHECK(Rng(1).uniform_index(1) == 0);
}

TEST_CASE("uniform01 and normal moments") {
    Rng r(11);
    const int n = 200000;
    double s = 0, s2 = 0, lo = 1, hi = 0;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform01();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        s += u;
    }
    CHECK(lo >= 0.0);
    CHECK(hi < 1.0);
    CHECK(std::fabs(s / n - 0.5) < 0.005);

    s = 0;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal(3.0, 2.0);
        s += z;
        s2 += z * z;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    CHECK(std::fabs(mean - 3.0) < 0.03);
    CHECK(std::fabs(var - 4.0) < 0.08);
}

TEST_CASE("bernoulli frequency") {
    Rng r(12);
    int hits = 0;
    for (int i = 0; i < 100000; ++i) hits += r.bernoulli(0.3);
    CHECK(std::fabs(hits / 100000.0 - 0.3) < 0.01);
}
