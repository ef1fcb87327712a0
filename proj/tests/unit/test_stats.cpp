// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "catch_amalgamated.hpp"
#include "test_support.hpp"
#include "wmprobe/decomposition.hpp"
#include "wmprobe/error.hpp"

using namespace wmprobe;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Two intents, two prompts each, two observations per cell.
NestedDataset eight_values() { return testutil::make_dataset({{{0, 2}, {0, 2}}, {{10, 12}, {10, 12}}}); }

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return Errc::Io;
}

}  // namespace

TEST_CASE("eight-value hand oracle") {
    // Grand mean 6. Intent means 1 and 11, so each value sits 5 from the
    // grand mean through the intent term: 25. Prompt means equal intent
    // means: 0. Values sit 1 from their cell mean: 1. Total 26.
    const auto r = stats::decompose_variance(eight_values());
    CHECK_THAT(r.total_variance, WithinAbs(26.0, 1e-12));
    CHECK_THAT(r.ps_raw, WithinAbs(25.0, 1e-12));
    CHECK_THAT(r.as_raw, WithinAbs(0.0, 1e-12));
    CHECK_THAT(r.mu_raw, WithinAbs(1.0, 1e-12));
    CHECK_THAT(r.ps, WithinAbs(25.0 / 26.0, 1e-12));
    CHECK_THAT(r.as_share, WithinAbs(0.0, 1e-12));
    CHECK_THAT(r.mu, WithinAbs(1.0 / 26.0, 1e-12));
    REQUIRE(r.mvs.has_value());
    CHECK_THAT(*r.mvs, WithinAbs(1.0, 1e-12));
    CHECK(r.n_intents == 2);
    CHECK(r.n_prompts == 4);
    CHECK(r.n_obs == 8);
}

TEST_CASE("standardize divides by the pooled population sd") {
    const auto s = stats::standardize(eight_values());
    const double k = 1.0 / std::sqrt(26.0);
    CHECK_THAT(s.intents[1].prompts[0].values[1], WithinRel(12.0 * k, 1e-14));
    CHECK_THAT(s.intents[0].prompts[1].values[1], WithinRel(2.0 * k, 1e-14));
    CHECK_THAT(stats::decompose_variance(s).total_variance, WithinAbs(1.0, 1e-12));
}

TEST_CASE("mvs values") {
    CHECK_THAT(stats::mvs(0.351, 0.022), WithinAbs(0.351 / 0.373, 1e-15));
    CHECK_THAT(stats::mvs(0.351, 0.022), WithinAbs(0.9410, 5e-5));
    CHECK(stats::mvs(0.4, 0.0) == 1.0);
    CHECK(stats::mvs(0.0, 0.3) == 0.0);
    CHECK(code_of([] { stats::mvs(0.0, 0.0); }) == Errc::Undefined);
    CHECK(code_of([] { stats::mvs(-0.1, 0.3); }) == Errc::InvalidArgument);
}

TEST_CASE("mvs is absent when ps and as vanish") {
    // Every cell identical in mean; only within-cell noise.
    const auto r = stats::decompose_variance(testutil::make_dataset({{{1, 3}}, {{1, 3}}}));
    CHECK(r.mu == 1.0);
    CHECK_FALSE(r.mvs.has_value());
}

TEST_CASE("degenerate and malformed datasets") {
    CHECK(code_of([] { stats::decompose_variance(testutil::make_dataset({{{4, 4}}, {{4}}})); }) ==
          Errc::ZeroDispersion);
    CHECK(code_of([] { stats::standardize(testutil::make_dataset({{{4, 4}}, {{4}}})); }) == Errc::ZeroDispersion);
    CHECK(code_of([] { stats::decompose_variance(testutil::make_dataset({{{1, 2}}})); }) == Errc::InvalidDataset);
    CHECK(code_of([] { stats::decompose_variance(testutil::make_dataset({{{1, 2}}, {{}}})); }) ==
          Errc::InvalidDataset);
    CHECK(code_of([] { stats::decompose_variance(testutil::make_dataset({{{1, NAN}}, {{2}}})); }) ==
          Errc::InvalidDataset);
    CHECK(code_of([] { testutil::make_dataset({{{1}}, {}}).validate(); }) == Errc::InvalidDataset);
    CHECK(code_of([] { stats::decompose_variance(testutil::make_labels({{{"a"}}, {{"b"}}})); }) ==
          Errc::InvalidDataset);
}

TEST_CASE("single prompt per intent has no articulation term") {
    const auto r = stats::decompose_variance(testutil::make_dataset({{{1, 2, 3}}, {{7, 8}}, {{0}}}));
    CHECK(r.as_raw == 0.0);
    const auto bf = testutil::brute_force(testutil::make_dataset({{{1, 2, 3}}, {{7, 8}}, {{0}}}));
    CHECK_THAT(r.ps_raw, WithinAbs(bf.ps, 1e-12));
    CHECK_THAT(r.mu_raw, WithinAbs(bf.mu, 1e-12));
}

TEST_CASE("unbalanced cells are weighted by observation counts") {
    // Intent 0: cells {0} and {10,10,10}; intent mean 7.5, not 5.
    const auto d = testutil::make_dataset({{{0}, {10, 10, 10}}, {{20, 22}}});
    const auto r = stats::decompose_variance(d);
    const auto bf = testutil::brute_force(d);
    CHECK_THAT(r.total_variance, WithinAbs(bf.total, 1e-12));
    CHECK_THAT(r.ps_raw, WithinAbs(bf.ps, 1e-12));
    CHECK_THAT(r.as_raw, WithinAbs(bf.as, 1e-12));
    CHECK_THAT(r.mu_raw, WithinAbs(bf.mu, 1e-12));
    // Hand values: grand mean 72/6 = 12; as term = (1*7.5^2 + 3*2.5^2)/6.
    CHECK_THAT(r.as_raw, WithinAbs((56.25 + 18.75) / 6.0, 1e-12));
}
