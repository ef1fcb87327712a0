// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "catch_amalgamated.hpp"
#include "test_support.hpp"
#include "wmprobe/collector.hpp"
#include "wmprobe/decomposition.hpp"
#include "wmprobe/error.hpp"
#include "wmprobe/extractor.hpp"
#include "wmprobe/synthetic.hpp"

using namespace wmprobe;
using namespace wmprobe::synth;
using Catch::Matchers::WithinAbs;

namespace {

collect::CollectionPlan plan_for(std::size_t n_variants, std::size_t n_intents, std::size_t responses) {
    collect::CollectionPlan p;
    p.run_id = "syn";
    p.model_id = "synthetic/model";
    p.task.task_id = "trip";
    p.task.template_text = "How long is the trip to {city}?";
    p.task.intent_values = {{"Miami", false}, {"Sydney", false}, {"Oslo", false}};
    p.task.extraction_instruction = "Extract the hours.\n\nAnswer text:\n{answer_text}";
    p.task.unit = "hours";
    for (std::size_t v = 0; v < n_variants; ++v) {
        PromptVariant pv;
        pv.variant_id = make_variant_id(v);
        pv.text = "Variant " + std::to_string(v) + ": trip time to {city}?";
        p.variants.push_back(pv);
    }
    p.n_intents = n_intents;
    p.responses_per_cell = responses;
    return p;
}

}  // namespace

TEST_CASE("true shares by hand") {
    // Intent means {0, 2}: population variance 1. Prompt and noise sd 1.
    const auto s = true_shares({{0.0, 2.0}, 1.0, 1.0, 0, NoiseKind::Gaussian});
    CHECK_THAT(s.ps, WithinAbs(1.0 / 3.0, 1e-15));
    CHECK_THAT(s.as_share, WithinAbs(1.0 / 3.0, 1e-15));
    CHECK_THAT(s.mu, WithinAbs(1.0 / 3.0, 1e-15));

    const auto t = true_shares({{1.0, 2.0, 3.0}, 0.0, 2.0, 0, NoiseKind::Laplace});
    // var{1,2,3} = 2/3; noise variance 4.
    CHECK_THAT(t.ps, WithinAbs((2.0 / 3.0) / (2.0 / 3.0 + 4.0), 1e-15));
    CHECK(t.as_share == 0.0);

    CHECK_THROWS_AS(true_shares({{5.0, 5.0}, 0.0, 0.0, 0, NoiseKind::Gaussian}), Error);
    CHECK_THROWS_AS(true_shares({{5.0}, 1.0, 1.0, 0, NoiseKind::Gaussian}), Error);
    CHECK_THROWS_AS(true_shares({{0.0, 1.0}, -1.0, 1.0, 0, NoiseKind::Gaussian}), Error);
}

TEST_CASE("conditional shares by hand") {
    // Cells: intent 0 at {-1, 1}, intent 1 at {4, 6}. Intent means 0 and 5:
    // between variance 6.25. Within-intent variance 1. Noise variance 1.
    const auto s = conditional_true_shares({{0.0, 5.0}, 1.0, 1.0, 0, NoiseKind::Gaussian}, {{-1.0, 1.0}, {-1.0, 1.0}});
    CHECK_THAT(s.ps, WithinAbs(6.25 / 8.25, 1e-15));
    CHECK_THAT(s.as_share, WithinAbs(1.0 / 8.25, 1e-15));
    CHECK_THAT(s.mu, WithinAbs(1.0 / 8.25, 1e-15));
}

TEST_CASE("simulation is deterministic and shaped as asked") {
    const SyntheticSpec spec{{0.0, 1.0, 4.0}, 0.5, 1.0, 21, NoiseKind::Gaussian};
    const auto a = simulate_with_effects(spec, 7, 9);
    const auto b = simulate_with_effects(spec, 7, 9);
    CHECK(a.dataset == b.dataset);
    CHECK(a.effects == b.effects);
    CHECK(a.dataset.n_intents() == 3);
    CHECK(a.dataset.n_prompts() == 21);
    CHECK(a.dataset.n_obs() == 189);
    CHECK(a.dataset.intents[2].intent_id == "2");
    CHECK(a.dataset.intents[0].prompts[6].prompt_id == "p006");
    auto other = spec;
    other.seed = 22;
    CHECK_FALSE(simulate(other, 7, 9) == a.dataset);
    // Adding prompts does not disturb the existing ones.
    const auto more = simulate(spec, 8, 9);
    CHECK(more.intents[1].prompts[3] == a.dataset.intents[1].prompts[3]);
}

TEST_CASE("noise has the requested spread") {
    for (auto kind : {NoiseKind::Gaussian, NoiseKind::Laplace}) {
        const SyntheticSpec spec{{0.0, 0.0}, 0.0, 3.0, 5, kind};
        const auto d = simulate(spec, 1, 200000);
        double s = 0, s2 = 0;
        for (double v : d.intents[0].prompts[0].values) {
            s += v;
            s2 += v * v;
        }
        const double n = 200000;
        CHECK(std::fabs(s / n) < 0.05);
        CHECK_THAT(s2 / n - (s / n) * (s / n), WithinAbs(9.0, 0.2));
    }
}

TEST_CASE("estimates land near the truth at design size") {
    const SyntheticSpec spec{{0.0, 2.0, 4.0}, 1.0, 2.0, 31, NoiseKind::Gaussian};
    const auto truth = true_shares(spec);
    const auto r = stats::decompose_variance(simulate(spec, 50, 50));
    CHECK_THAT(r.ps, WithinAbs(truth.ps, 0.08));
    CHECK_THAT(r.as_share, WithinAbs(truth.as_share, 0.05));
    CHECK_THAT(r.mu, WithinAbs(truth.mu, 0.05));
}

TEST_CASE("synthetic backend answers round-trip through the extractor") {
    const auto plan = plan_for(3, 2, 10);
    const SyntheticSpec spec{{5.0, 20.0}, 1.0, 0.5, 77, NoiseKind::Gaussian};
    FormatterConfig plain;
    plain.about_weight = 0.0;
    plain.range_weight = 0.0;
    SyntheticBackend backend(spec, plan, plain);
    const extract::Extractor ex(plan.task, backend);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t v = 0; v < 3; ++v)
            for (std::int64_t a = 0; a < 20; ++a) {
                const auto prompt = collect::render_prompt(plan.task, plan.variants[v], i);
                const auto reply = backend.complete(collect::elicitation_request(plan, prompt, a));
                const auto out = ex(reply.text);
                REQUIRE_FALSE(out.discarded());
                REQUIRE(out.value() == backend.value_for(i, v, a));
            }
}

TEST_CASE("every answer format extracts to the drawn value") {
    const auto plan = plan_for(2, 3, 10);
    FormatterConfig f;
    f.none_probability = 0.25;
    f.range_half_width = 0.5;
    SyntheticBackend backend({{1.0, 2.0, 3.0}, 0.3, 0.3, 8, NoiseKind::Gaussian}, plan, f);
    const extract::Extractor ex(plan.task, backend);
    std::size_t none = 0, total = 0;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::int64_t a = 0; a < 200; ++a) {
            const auto prompt = collect::render_prompt(plan.task, plan.variants[1], i);
            const auto out = ex(backend.complete(collect::elicitation_request(plan, prompt, a)).text);
            ++total;
            if (out.discarded()) {
                CHECK(out.reason() == extract::DiscardReason::NoneAnswer);
                ++none;
                continue;
            }
            REQUIRE_THAT(out.value(), WithinAbs(backend.value_for(i, 1, a), 1e-12));
        }
    CHECK(std::fabs(static_cast<double>(none) / static_cast<double>(total) - 0.25) < 0.06);
}

TEST_CASE("backend rejects unknown prompts and mismatched specs") {
    const auto plan = plan_for(2, 2, 5);
    SyntheticBackend backend({{1.0, 2.0}, 0.1, 0.1, 1, NoiseKind::Gaussian}, plan);
    ChatRequest r;
    r.user = "unrelated";
    CHECK_FALSE(backend.handles(r));
    CHECK_THROWS_AS(backend.complete(r), Error);
    CHECK_THROWS_AS(SyntheticBackend({{1.0, 2.0, 3.0}, 0.1, 0.1, 1, NoiseKind::Gaussian}, plan), Error);

    SyntheticRouter router;
    router.add(backend);
    CHECK(router.size() == 1);
    CHECK_THROWS_AS(router.complete(r), Error);
}

TEST_CASE("collected synthetic data recovers the backend's effects") {
    const auto plan = plan_for(4, 3, 30);
    const SyntheticSpec spec{{0.0, 10.0, 20.0}, 2.0, 1.0, 12, NoiseKind::Gaussian};
    SyntheticBackend backend(spec, plan);
    const extract::Extractor ex(plan.task, backend);
    const auto tc = collect::collect_task(plan, backend, ex);
    REQUIRE(tc.complete());
    const auto& d = *tc.dataset;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t v = 0; v < 4; ++v) {
            double m = 0;
            for (double x : d.intents[i].prompts[v].values) m += x;
            m /= 30.0;
            CHECK_THAT(m, WithinAbs(spec.intent_means[i] + backend.effects()[i][v], 0.8));
        }
}

TEST_CASE("format_number is shortest fixed notation") {
    CHECK(format_number(2.5) == "2.5");
    CHECK(format_number(1e21) == "1000000000000000000000");
    CHECK(format_number(-0.125) == "-0.125");
    CHECK(format_number(0.1) == "0.1");
    CHECK(std::stod(format_number(1234.5678901234)) == 1234.5678901234);
}

TEST_CASE("categorical simulation and analytic decomposition") {
    CategoricalSpec spec;
    spec.labels = {"a", "b"};
    spec.tables = {{{1.0, 0.0}}, {{0.0, 1.0}}};
    spec.seed = 2;
    const auto t = true_entropy_decomposition(spec);
    CHECK_THAT(t.total_entropy, WithinAbs(1.0, 1e-15));
    CHECK_THAT(t.ps_info, WithinAbs(1.0, 1e-15));
    const auto d = simulate_categorical(spec, 5);
    CHECK(d.intents[0].prompts[0].labels == std::vector<std::string>(5, "a"));
    CHECK(d.intents[1].prompts[0].labels == std::vector<std::string>(5, "b"));
    spec.tables[0][0] = {0.5, 0.6};
    CHECK_THROWS_AS(spec.validate(), Error);
}
