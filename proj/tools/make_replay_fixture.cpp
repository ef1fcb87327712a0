// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

// Regenerates data/fixtures/replay_run and the replay goldens.
//
//   make_replay_fixture <repo-root>
//
// The synthetic model answers every elicitation and extraction request once;
// the exchanges are recorded as a replay fixture. The goldens are then produced
// by replaying that fixture through the normal collect and decompose path.

#include <cstdio>
#include <filesystem>

#include "wmprobe/chat_backend.hpp"
#include "wmprobe/datastore.hpp"
#include "wmprobe/json_file.hpp"
#include "wmprobe/pipeline.hpp"
#include "wmprobe/replay_plan.hpp"
#include "wmprobe/report.hpp"
#include "wmprobe/synthetic.hpp"

namespace fs = std::filesystem;
using namespace wmprobe;

namespace {

PromptVariant variant(std::size_t i, std::string text, OriginKind kind, std::vector<std::string> langs = {}) {
    PromptVariant v;
    v.variant_id = make_variant_id(i);
    v.text = std::move(text);
    v.origin = {kind, std::move(langs)};
    v.verified = true;
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: %s <repo-root>\n", argv[0]);
        return 2;
    }
    const fs::path root = argv[1];
    const fs::path fixture_dir = root / "data/fixtures/replay_run";
    const fs::path golden_dir = root / "tests/golden";
    const auto suite = store::load_suite(root / "data/tasks.json");

    pipeline::VariantMap variants;
    variants["federal_tax"] = {
        pipeline::base_variant(suite.find("federal_tax")),
        variant(1,
                "I am single, have no dependents and make {INCOME} per year. Roughly how much federal income tax "
                "will I owe?",
                OriginKind::TranslationChain, {"Japanese", "German", "English"}),
        variant(2, "With an annual income of {INCOME}, filing single and no dependents, what would my federal tax bill be?",
                OriginKind::TranslationChain, {"Arabic", "Spanish", "English"}),
    };
    variants["moving_trucks"] = {
        pipeline::base_variant(suite.find("moving_trucks")),
        variant(1, "How many 10-foot rental trucks do we need to move {boxes} standard moving boxes?",
                OriginKind::TranslationChain, {"Chinese", "French", "English"}),
        variant(2, "We have {boxes} standard moving boxes to ship. How many 10-foot trucks should we hire?",
                OriginKind::TranslationChain, {"Korean", "Japanese", "English"}),
    };

    const auto plan = replay::fixture_plan();

    // Per-task synthetic models on the tasks' own scales.
    synth::SyntheticRouter router;
    synth::FormatterConfig fmt;
    fmt.none_probability = 0.15;
    const std::map<std::string, synth::SyntheticSpec> specs{
        {"federal_tax", {{2400.0, 5200.0}, 350.0, 600.0, 11, synth::NoiseKind::Gaussian}},
        {"moving_trucks", {{2.0, 5.0}, 0.6, 1.0, 12, synth::NoiseKind::Gaussian}},
    };
    for (const auto& [task_id, vs] : variants) {
        collect::CollectionPlan p;
        p.task = suite.find(task_id);
        p.variants = vs;
        p.n_intents = plan.n_intents;
        auto f = fmt;
        f.range_half_width = task_id == "federal_tax" ? 250.0 : 1.0;
        router.add(synth::SyntheticBackend(specs.at(task_id), p, f));
    }
    RecordingBackend recorder(router);

    const fs::path scratch = fs::temp_directory_path() / "wmprobe_fixture_scratch";
    fs::remove_all(scratch);
    pipeline::collect_run(scratch, suite, variants, plan, recorder, recorder);

    fs::create_directories(fixture_dir);
    fs::copy_file(scratch / store::kVariantsFile, fixture_dir / store::kVariantsFile, fs::copy_options::overwrite_existing);
    recorder.save(fixture_dir / replay::kFixtureFile);

    // Goldens come from a clean replay, exactly as the test will run it.
    const fs::path replay_dir = scratch / "replay";
    replay::run_fixture(fixture_dir, suite, replay_dir);
    const auto results = pipeline::decompose_run(replay_dir, suite, replay::fixture_bootstrap());
    fs::create_directories(golden_dir);
    store::save_results(golden_dir / "replay_results.json", results);
    const RunResults one[] = {results};
    write_text_file(golden_dir / "replay_table.txt", report::render_table(one));
    fs::remove_all(scratch);
    std::printf("fixture: %zu exchanges\n", recorder.fixtures().size());
    return 0;
}
