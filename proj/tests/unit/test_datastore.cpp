// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <set>

#include "catch_amalgamated.hpp"
#include "test_support.hpp"
#include "wmprobe/datastore.hpp"
#include "wmprobe/error.hpp"
#include "wmprobe/json_file.hpp"

using namespace wmprobe;
using nlohmann::json;

namespace {

collect::ResponseRecord record(std::size_t intent, std::size_t variant, std::size_t attempt, std::optional<double> v,
                               std::string run = "run-a") {
    collect::ResponseRecord r;
    r.run_id = std::move(run);
    r.task_id = "moving_trucks";
    r.intent_index = intent;
    r.variant_id = make_variant_id(variant);
    r.raw_text = v ? "about " + std::to_string(*v) + " \xE2\x80\x94 roughly" : "no idea";
    r.attempt = attempt;
    r.backend_meta = "m";
    if (v) {
        r.extracted = *v;
        r.slot = attempt;
    } else {
        r.discard_reason = extract::DiscardReason::Unparseable;
    }
    return r;
}

std::vector<collect::ResponseRecord> sample_records() {
    std::vector<collect::ResponseRecord> out;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t v = 0; v < 2; ++v) {
            out.push_back(record(i, v, 0, 1.5 * static_cast<double>(i + v)));
            out.push_back(record(i, v, 1, 0.25 + static_cast<double>(i)));
        }
    out.push_back(record(1, 1, 2, std::nullopt));
    return out;
}

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::Io;
}

json minimal_suite() {
    return json{{"record_type", "task_suite"},
                {"schema_version", 1},
                {"version", "t"},
                {"tasks",
                 {{{"task_id", "a"},
                   {"category", "logistics"},
                   {"template", "Q {x}?"},
                   {"intent_values", {1, 2.5}},
                   {"extraction_instruction", "{answer_text}"},
                   {"unit", "u"}}}}};
}

}  // namespace

TEST_CASE("bundled suite contents") {
    const auto suite = store::load_suite(testutil::source_dir() / "data/tasks.json");
    CHECK(suite.tasks.size() == 15);
    std::map<Category, int> per_category;
    for (const auto& t : suite.tasks) {
        ++per_category[t.category];
        CHECK_NOTHROW(t.validate());
        CHECK(t.extraction_instruction.find("{answer_text}") != std::string::npos);
        CHECK(t.intent_values.size() >= 2);
        CHECK_FALSE(t.unit.empty());
    }
    CHECK(per_category.size() == 5);
    for (const auto& [c, n] : per_category) CHECK(n == 3);

    const auto& tax = suite.find("federal_tax");
    CHECK(tax.category == Category::PersonalFinance);
    CHECK(tax.placeholder() == "{INCOME}");
    REQUIRE(tax.intent_values.size() == 3);
    CHECK(tax.intent_values[0].text == "$30,000");
    CHECK(tax.intent_values[1].text == "$50,000");
    CHECK(tax.intent_values[2].text == "$100,000");
    CHECK(tax.survey_placeholder_mismatch());
    CHECK(tax.unit == "dollars");

    CHECK(suite.find("prednisone_supply").unit == "days");
    CHECK_THROWS_AS(suite.find("nope"), Error);
}

TEST_CASE("suite round-trips through JSON") {
    const auto suite = store::load_suite(testutil::source_dir() / "data/tasks.json");
    const auto again = store::parse_suite(store::suite_to_json(suite));
    CHECK(again.version == suite.version);
    CHECK(again.tasks == suite.tasks);
}

TEST_CASE("numeric intent values keep their JSON rendering") {
    const auto suite = store::parse_suite(minimal_suite());
    CHECK(suite.tasks[0].intent_values[0] == IntentValue{"1", true});
    CHECK(suite.tasks[0].intent_values[1] == IntentValue{"2.5", true});
}

TEST_CASE("suite schema errors name the field") {
    auto j = minimal_suite();
    j["tasks"].push_back(j["tasks"][0]);
    CHECK(code_of([&] { store::parse_suite(j); }) == Errc::DuplicateTaskId);

    j = minimal_suite();
    j["tasks"][0]["category"] = "astrology";
    try {
        store::parse_suite(j);
        FAIL("expected SchemaError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::SchemaError);
        CHECK(std::string(e.what()).find("tasks[0].category") != std::string::npos);
    }

    j = minimal_suite();
    j["tasks"][0].erase("unit");
    CHECK(code_of([&] { store::parse_suite(j); }) == Errc::SchemaError);
    j = minimal_suite();
    j["tasks"][0]["template"] = "Q {x} and {y}?";
    CHECK(code_of([&] { store::parse_suite(j); }) == Errc::SchemaError);
    j = minimal_suite();
    j["tasks"][0]["intent_values"] = {1};
    CHECK(code_of([&] { store::parse_suite(j); }) == Errc::SchemaError);
    j = minimal_suite();
    j["schema_version"] = 2;
    CHECK(code_of([&] { store::parse_suite(j); }) == Errc::SchemaError);
}

TEST_CASE("records round-trip through the JSONL store") {
    testutil::TempDir dir("records");
    const auto path = dir.path() / store::kResponsesFile;
    const auto recs = sample_records();
    {
        store::RecordWriter w(path);
        w.append(std::span(recs).first(4));
        w.append(std::span(recs).subspan(4));
    }
    const auto back = store::load_records(path);
    CHECK(back == recs);

    for (const auto& r : recs) CHECK(store::record_from_json(store::record_to_json(r)) == r);
    const auto j = store::record_to_json(recs.back());
    CHECK(j["record_type"] == "response");
    CHECK(j["schema_version"] == 1);
    CHECK(j["discard_reason"] == "unparseable");
}

TEST_CASE("record invariants are enforced on load") {
    auto j = store::record_to_json(record(0, 0, 0, 2.0));
    j.erase("slot");
    CHECK(code_of([&] { store::record_from_json(j); }) == Errc::SchemaError);
    j = store::record_to_json(record(0, 0, 0, 2.0));
    j["discard_reason"] = "empty";
    CHECK(code_of([&] { store::record_from_json(j); }) == Errc::SchemaError);
    j = store::record_to_json(record(0, 0, 0, std::nullopt));
    j.erase("discard_reason");
    CHECK(code_of([&] { store::record_from_json(j); }) == Errc::SchemaError);
}

TEST_CASE("a truncated last line is reported and repairable") {
    testutil::TempDir dir("corrupt");
    const auto path = dir.path() / store::kResponsesFile;
    const auto recs = sample_records();
    {
        store::RecordWriter w(path);
        w.append(recs);
    }
    {
        std::ofstream out(path, std::ios::app | std::ios::binary);
        out << R"({"record_type":"response","run_id":"run-a","ta)";
    }
    try {
        store::load_records(path);
        FAIL("expected CorruptLine");
    } catch (const CorruptLineError& e) {
        CHECK(e.code() == Errc::CorruptLine);
        CHECK(e.line() == recs.size() + 1);
    }
    const auto lenient = store::load_records_lenient(path);
    CHECK(lenient.records == recs);
    CHECK(lenient.corrupt_line == recs.size() + 1);

    CHECK(store::repair_records(path) == recs.size());
    CHECK(store::load_records(path) == recs);
    CHECK(store::repair_records(path) == recs.size());
}

TEST_CASE("records from two runs are refused") {
    testutil::TempDir dir("mixed");
    const auto path = dir.path() / store::kResponsesFile;
    auto recs = sample_records();
    recs.push_back(record(0, 0, 5, 1.0, "run-b"));
    {
        store::RecordWriter w(path);
        w.append(recs);
    }
    CHECK(code_of([&] { store::load_records(path); }) == Errc::MixedRun);
}

TEST_CASE("dataset and audit views of a run") {
    testutil::TempDir dir("views");
    const auto recs = sample_records();
    {
        store::RecordWriter w(dir.path() / store::kResponsesFile);
        w.append(recs);
    }
    const auto d = store::load_dataset(dir.path(), "moving_trucks");
    CHECK(d.n_intents() == 2);
    CHECK(d.n_obs() == 8);
    CHECK(d.intents[1].prompts[1].values == std::vector<double>{3.0, 1.25});
    const auto audit = store::load_audit(dir.path(), "moving_trucks");
    CHECK(audit.size() == 9);
    CHECK(audit.back().raw_text == "no idea");
    CHECK(store::load_audit(dir.path(), "other").empty());
}

TEST_CASE("variants round-trip and group by task") {
    testutil::TempDir dir("variants");
    const auto path = dir.path() / store::kVariantsFile;
    PromptVariant a;
    a.variant_id = make_variant_id(0);
    a.text = "Base {x}";
    PromptVariant b;
    b.variant_id = make_variant_id(1);
    b.text = "Para {x}";
    b.origin = {OriginKind::TranslationChain, {"Japanese", "Polish", "English"}};
    b.verified = true;
    b.embedding = std::vector<double>{0.6, 0.8};
    const std::vector<PromptVariant> t1{a, b};
    const std::vector<PromptVariant> t2{a};
    store::save_variants(path, "t1", t1);
    store::save_variants(path, "t2", t2, true);
    auto m = store::load_variants(path);
    CHECK(m.size() == 2);
    CHECK(m["t1"] == t1);
    CHECK(m["t2"] == t2);
    store::save_variants(path, "t2", t2, false);
    CHECK(store::load_variants(path).size() == 1);
}

TEST_CASE("datasets round-trip in both modes") {
    testutil::TempDir dir("datasets");
    std::mt19937_64 g(1);
    const auto d = testutil::random_dataset(g);
    store::save_dataset_file(dir.path() / "d.json", d);
    CHECK(store::load_dataset_file(dir.path() / "d.json") == d);
    const auto l = testutil::make_labels({{{"a", "b"}}, {{"c"}, {"a"}}});
    CHECK(store::dataset_from_json(store::dataset_to_json(l)) == l);
    auto bad = store::dataset_to_json(l);
    bad["mode"] = "ordinal";
    CHECK(code_of([&] { store::dataset_from_json(bad); }) == Errc::SchemaError);
}

TEST_CASE("manifest round-trip and status rule") {
    testutil::TempDir dir("manifest");
    store::RunManifest m;
    m.run_id = "r";
    m.suite_version = "1.0.0";
    m.model_id = "x/y";
    m.backend_kind = "synthetic";
    m.seed = 0xffffffffffffffffULL;
    m.created = store::utc_timestamp();
    m.updated = m.created;
    m.status = store::RunStatus::Complete;
    m.responses_per_cell = 5;
    m.counts["a"] = {4, 4, 20, 3};
    store::save_manifest(dir.path(), m);
    CHECK(store::load_manifest(dir.path()) == m);
    CHECK(m.created.size() == 20);
    CHECK(m.created.back() == 'Z');

    m.counts["b"] = {4, 3, 15, 0};
    CHECK(code_of([&] { m.validate(); }) == Errc::SchemaError);
    m.status = store::RunStatus::Partial;
    CHECK_NOTHROW(m.validate());
    CHECK(store::to_string(store::RunStatus::Failed) == "failed");
}

TEST_CASE("results round-trip exactly") {
    testutil::TempDir dir("results");
    RunResults r;
    r.run_id = "r";
    r.model_id = "m";
    TaskResult t;
    t.task_id = "a";
    t.category = "logistics";
    t.unit = "u";
    t.decomposition.total_variance = 0.1 + 0.2;
    t.decomposition.ps = 1.0 / 3.0;
    t.decomposition.as_share = 2.0 / 7.0;
    t.decomposition.mu = 1.0 - 1.0 / 3.0 - 2.0 / 7.0;
    t.decomposition.mvs = 0.5384615384615384;
    t.decomposition.n_intents = 2;
    t.bootstrap = BootstrapSummary{100, 1, 0.95, 42, {0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}, std::nullopt};
    t.cells = {{"0", "v00000", 5, 1e-300}, {"1", "v00001", 5, -2.5}};
    r.tasks.push_back(t);
    t.task_id = "b";
    t.bootstrap.reset();
    t.decomposition.mvs.reset();
    r.tasks.push_back(t);
    const auto path = dir.path() / store::kResultsFile;
    store::save_results(path, r);
    CHECK(store::load_results(path) == r);
    const auto text = read_text_file(path);
    store::save_results(path, store::load_results(path));
    CHECK(read_text_file(path) == text);
}

TEST_CASE("missing files are Io errors") {
    CHECK(code_of([] { store::load_records("/nonexistent/wmprobe/responses.jsonl"); }) == Errc::Io);
    CHECK(code_of([] { store::load_suite("/nonexistent/wmprobe/tasks.json"); }) == Errc::Io);
}
