// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "catch_amalgamated.hpp"
#include "test_support.hpp"
#include "wmprobe/datastore.hpp"
#include "wmprobe/json_file.hpp"
#include "wmprobe/pipeline.hpp"
#include "wmprobe/replay_plan.hpp"
#include "wmprobe/report.hpp"

using namespace wmprobe;
namespace fs = std::filesystem;

namespace {

struct Replayed {
    testutil::TempDir dir{"golden"};
    fs::path run;
    RunResults results;
};

const Replayed& replayed() {
    static Replayed r = [] {
        Replayed out;
        const auto suite = store::load_suite(testutil::source_dir() / "data/tasks.json");
        out.run = out.dir.path() / "run";
        replay::run_fixture(testutil::source_dir() / "data/fixtures/replay_run", suite, out.run);
        out.results = pipeline::decompose_run(out.run, suite, replay::fixture_bootstrap());
        return out;
    }();
    return r;
}

}  // namespace

TEST_CASE("fixture plan matches the bundled fixture") {
    const auto plan = replay::fixture_plan();
    CHECK(plan.n_intents == 2);
    CHECK(plan.responses_per_cell == 5);
    const auto variants = store::load_variants(testutil::source_dir() / "data/fixtures/replay_run" / store::kVariantsFile);
    CHECK(variants.size() == 2);
    for (const auto& [task, vs] : variants) CHECK(vs.size() == 3);
}

TEST_CASE("replayed run is complete and verifies") {
    const auto& r = replayed();
    const auto m = store::load_manifest(r.run);
    CHECK(m.status == store::RunStatus::Complete);
    CHECK(m.counts.size() == 2);
    for (const auto& c : pipeline::verify_run(r.run)) {
        INFO(c.name << ": " << c.detail);
        CHECK(c.passed);
    }
}

TEST_CASE("results.json matches the golden file byte for byte") {
    const auto& r = replayed();
    const auto path = r.dir.path() / "results.json";
    store::save_results(path, r.results);
    CHECK(read_text_file(path) == read_text_file(testutil::source_dir() / "tests/golden/replay_results.json"));
}

TEST_CASE("rendered table matches the golden file") {
    const RunResults one[] = {replayed().results};
    CHECK(report::render_table(one) == read_text_file(testutil::source_dir() / "tests/golden/replay_table.txt"));
}

TEST_CASE("golden point estimates agree with the brute-force oracle") {
    const auto golden = store::load_results(testutil::source_dir() / "tests/golden/replay_results.json");
    const auto datasets = pipeline::run_datasets(replayed().run);
    REQUIRE(golden.tasks.size() == 2);
    for (const auto& t : golden.tasks) {
        const auto bf = testutil::brute_force(datasets.at(t.task_id));
        INFO(t.task_id);
        const auto& d = t.decomposition;
        CHECK(std::fabs(d.total_variance - bf.total) <= 1e-12 * bf.total);
        CHECK(std::fabs(d.ps - bf.ps / bf.total) <= 1e-12);
        CHECK(std::fabs(d.as_share - bf.as / bf.total) <= 1e-12);
        CHECK(std::fabs(d.mu - bf.mu / bf.total) <= 1e-12);
        REQUIRE(d.mvs);
        CHECK(std::fabs(*d.mvs - bf.ps / (bf.ps + bf.as)) <= 1e-12);
        REQUIRE(t.bootstrap);
        CHECK(t.bootstrap->replicates == 200);
        CHECK(t.bootstrap->ps.lower <= d.ps);
        CHECK(d.ps <= t.bootstrap->ps.upper);
    }
}
