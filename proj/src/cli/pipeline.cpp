// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "wmprobe/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "wmprobe/decomposition.hpp"
#include "wmprobe/error.hpp"
#include "wmprobe/json_file.hpp"
#include "wmprobe/report.hpp"

namespace wmprobe::pipeline {

namespace fs = std::filesystem;

PromptVariant base_variant(const TaskSpec& task) {
    PromptVariant v;
    v.variant_id = make_variant_id(0);
    v.text = task.template_text;
    v.origin.kind = OriginKind::Base;
    v.verified = true;
    return v;
}

std::vector<PromptVariant> build_variant_set(const TaskSpec& task, const VariantSetOptions& options,
                                             ChatBackend& translator, ChatBackend& judge,
                                             promptgen::Embedder& embedder) {
    if (options.k > options.n)
        throw Error(Errc::InvalidArgument, "cannot keep " + std::to_string(options.k) + " of " +
                                               std::to_string(options.n) + " candidates");
    std::vector<PromptVariant> candidates;
    if (options.survey) {
        candidates = promptgen::generate_survey_prompts(task, options.n, translator, options.generation);
    } else {
        Rng rng(derive_seed(options.seed, {0x70676e}));
        candidates = promptgen::generate_paraphrases(task, options.n, translator, judge, rng, options.generation);
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i].variant_id = make_variant_id(i + 1);

    std::vector<PromptVariant> out{base_variant(task)};
    if (options.k == 0) return out;
    promptgen::embed_variants(candidates, embedder);
    auto chosen = promptgen::select_diverse(candidates, options.k);
    out.insert(out.end(), chosen.begin(), chosen.end());
    return out;
}

namespace {

store::TaskCounts count_task(std::span<const collect::ResponseRecord> records, const std::string& task_id,
                             std::size_t planned_cells, std::size_t per_cell) {
    store::TaskCounts c;
    c.planned_cells = planned_cells;
    std::map<std::pair<std::size_t, std::string>, std::size_t> filled;
    for (const auto& r : records) {
        if (r.task_id != task_id) continue;
        if (r.retained()) {
            ++c.retained;
            ++filled[{r.intent_index, r.variant_id}];
        } else {
            ++c.discarded;
        }
    }
    for (const auto& [cell, n] : filled)
        if (n >= per_cell) ++c.complete_cells;
    return c;
}

bool all_full(const store::RunManifest& m) {
    for (const auto& [task, c] : m.counts)
        if (c.complete_cells != c.planned_cells) return false;
    return !m.counts.empty();
}

}  // namespace

CollectSummary collect_run(const fs::path& run_dir, const store::TaskSuite& suite, const VariantMap& variants,
                           const CollectOptions& options, ChatBackend& model, ChatBackend& extraction_backend) {
    fs::create_directories(run_dir);
    const fs::path responses = run_dir / store::kResponsesFile;
    const fs::path variants_path = run_dir / store::kVariantsFile;

    std::vector<collect::ResponseRecord> prior;
    if (fs::exists(responses)) prior = store::load_records(responses);
    for (const auto& r : prior)
        if (r.run_id != options.run_id)
            throw Error(Errc::MixedRun, run_dir.string() + " holds run '" + r.run_id + "', not '" + options.run_id + "'");

    store::RunManifest manifest;
    if (fs::exists(run_dir / store::kManifestFile)) {
        manifest = store::load_manifest(run_dir);
        if (manifest.run_id != options.run_id)
            throw Error(Errc::MixedRun,
                        run_dir.string() + " holds run '" + manifest.run_id + "', not '" + options.run_id + "'");
    } else {
        manifest.created = store::utc_timestamp();
    }
    manifest.run_id = options.run_id;
    manifest.suite_version = suite.version;
    manifest.model_id = options.model_id;
    manifest.backend_kind = options.backend_kind.empty() ? std::string(model.kind()) : options.backend_kind;
    manifest.seed = options.seed;
    manifest.responses_per_cell = options.responses_per_cell;

    if (fs::exists(variants_path)) {
        const auto stored = store::load_variants(variants_path);
        for (const auto& [task_id, vs] : variants) {
            auto it = stored.find(task_id);
            if (it != stored.end() && it->second != vs)
                throw Error(Errc::MixedRun, "variants for task '" + task_id + "' differ from those stored in the run");
        }
    }
    {
        VariantMap merged = fs::exists(variants_path) ? store::load_variants(variants_path) : VariantMap{};
        for (const auto& [task_id, vs] : variants) merged[task_id] = vs;
        bool first = true;
        for (const auto& [task_id, vs] : merged) {
            store::save_variants(variants_path, task_id, vs, !first);
            first = false;
        }
    }

    // Plans first so a bad task aborts before any request is made.
    std::vector<collect::CollectionPlan> plans;
    for (const auto& [task_id, vs] : variants) {
        collect::CollectionPlan plan;
        plan.run_id = options.run_id;
        plan.model_id = options.model_id;
        plan.task = suite.find(task_id);
        plan.variants = vs;
        plan.n_intents = options.n_intents;
        plan.responses_per_cell = options.responses_per_cell;
        plan.max_attempts_per_cell = options.max_attempts_per_cell;
        plan.temperature = options.temperature;
        plan.max_tokens = options.max_tokens;
        plan.max_in_flight = options.max_in_flight;
        plan.validate();
        manifest.counts[task_id] = count_task(prior, task_id, plan.intent_count() * vs.size(), plan.responses_per_cell);
        plans.push_back(std::move(plan));
    }
    manifest.status = store::RunStatus::Partial;
    manifest.updated = store::utc_timestamp();
    store::save_manifest(run_dir, manifest);

    CollectSummary summary;
    store::RecordWriter writer(responses);
    try {
        for (const auto& plan : plans) {
            extract::Extractor extractor(plan.task, extraction_backend, options.extractor);
            auto sink = [&](std::span<const collect::ResponseRecord> fresh) { writer.append(fresh); };
            const auto result = collect::collect_task(plan, model, extractor, sink, prior);
            for (const auto& f : result.failures) summary.failures.push_back({plan.task.task_id, f});
            manifest.counts[plan.task.task_id] = count_task(result.records, plan.task.task_id,
                                                            plan.intent_count() * plan.variants.size(),
                                                            plan.responses_per_cell);
            manifest.updated = store::utc_timestamp();
            store::save_manifest(run_dir, manifest);
        }
    } catch (...) {
        manifest.status = store::RunStatus::Failed;
        manifest.updated = store::utc_timestamp();
        store::save_manifest(run_dir, manifest);
        throw;
    }
    manifest.status = all_full(manifest) ? store::RunStatus::Complete : store::RunStatus::Partial;
    manifest.updated = store::utc_timestamp();
    store::save_manifest(run_dir, manifest);
    summary.manifest = manifest;
    return summary;
}

std::map<std::string, NestedDataset> run_datasets(const fs::path& run_dir) {
    const auto records = store::load_records(run_dir / store::kResponsesFile);
    std::set<std::string> tasks;
    for (const auto& r : records) tasks.insert(r.task_id);
    std::map<std::string, NestedDataset> out;
    for (const auto& t : tasks) out.emplace(t, collect::build_dataset(records, t));
    return out;
}

RunResults decompose_run(const fs::path& run_dir, const store::TaskSuite& suite,
                         const std::optional<stats::BootstrapOptions>& bootstrap, bool allow_partial) {
    const auto manifest = store::load_manifest(run_dir);
    if (manifest.status != store::RunStatus::Complete && !allow_partial)
        throw Error(Errc::InvalidDataset, "run '" + manifest.run_id + "' is " + std::string(store::to_string(manifest.status)) +
                                              "; finish collection or pass --allow-partial");
    const auto records = store::load_records(run_dir / store::kResponsesFile);
    RunResults out;
    out.run_id = manifest.run_id;
    out.model_id = manifest.model_id;
    for (const auto& [task_id, counts] : manifest.counts) {
        const auto d = collect::build_dataset(records, task_id);
        out.tasks.push_back(report::summarize_task(suite.find(task_id), d, bootstrap));
    }
    return out;
}

std::size_t reextract_run(const fs::path& run_dir, const store::TaskSuite& suite, ChatBackend& extraction_backend,
                          const extract::ExtractorConfig& config) {
    auto records = store::load_records(run_dir / store::kResponsesFile);
    std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
        return std::tie(a.task_id, a.intent_index, a.variant_id, a.attempt) <
               std::tie(b.task_id, b.intent_index, b.variant_id, b.attempt);
    });
    std::size_t changed = 0;
    std::map<std::tuple<std::string, std::size_t, std::string>, std::size_t> next_slot;
    for (auto& r : records) {
        const auto outcome = extract::extract(r.raw_text, suite.find(r.task_id), extraction_backend, config);
        const auto before = std::make_pair(r.extracted, r.discard_reason);
        r.extracted.reset();
        r.discard_reason.reset();
        r.slot.reset();
        if (outcome.discarded()) {
            r.discard_reason = outcome.reason();
        } else {
            r.extracted = outcome.value();
            r.slot = next_slot[{r.task_id, r.intent_index, r.variant_id}]++;
        }
        if (before != std::make_pair(r.extracted, r.discard_reason)) ++changed;
    }
    std::string text;
    for (const auto& r : records) text += store::record_to_json(r).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
    write_text_file(run_dir / store::kResponsesFile, text);

    auto manifest = store::load_manifest(run_dir);
    for (auto& [task_id, c] : manifest.counts) c = count_task(records, task_id, c.planned_cells, manifest.responses_per_cell);
    if (manifest.status == store::RunStatus::Complete && !all_full(manifest)) manifest.status = store::RunStatus::Partial;
    if (manifest.status == store::RunStatus::Partial && all_full(manifest)) manifest.status = store::RunStatus::Complete;
    manifest.updated = store::utc_timestamp();
    store::save_manifest(run_dir, manifest);
    return changed;
}

// --- verification ------------------------------------------------------------------------

namespace {

std::string num(double x) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

struct Flat {
    double v;
    std::size_t i;
    std::size_t p;  // global prompt index
};

// Components by direct sums over a flat observation list.
std::array<double, 3> direct_components(const NestedDataset& d) {
    std::vector<Flat> obs;
    std::size_t gp = 0;
    for (std::size_t i = 0; i < d.intents.size(); ++i)
        for (const auto& p : d.intents[i].prompts) {
            for (double v : p.values) obs.push_back({v, i, gp});
            ++gp;
        }
    std::map<std::size_t, std::pair<double, std::size_t>> by_i, by_p;
    double grand = 0.0;
    for (const auto& o : obs) {
        grand += o.v;
        by_i[o.i].first += o.v;
        ++by_i[o.i].second;
        by_p[o.p].first += o.v;
        ++by_p[o.p].second;
    }
    const double n = static_cast<double>(obs.size());
    grand /= n;
    double ps = 0, as = 0, mu = 0;
    for (const auto& o : obs) {
        const double mi = by_i[o.i].first / static_cast<double>(by_i[o.i].second);
        const double mp = by_p[o.p].first / static_cast<double>(by_p[o.p].second);
        ps += (mi - grand) * (mi - grand);
        as += (mp - mi) * (mp - mi);
        mu += (o.v - mp) * (o.v - mp);
    }
    return {ps / n, as / n, mu / n};
}

NestedDataset transformed(const NestedDataset& d, double scale, double shift) {
    NestedDataset out = d;
    for (auto& i : out.intents)
        for (auto& p : i.prompts)
            for (auto& v : p.values) v = v * scale + shift;
    return out;
}

NestedDataset reversed(const NestedDataset& d) {
    NestedDataset out = d;
    std::reverse(out.intents.begin(), out.intents.end());
    for (auto& i : out.intents) {
        std::reverse(i.prompts.begin(), i.prompts.end());
        for (auto& p : i.prompts) std::reverse(p.values.begin(), p.values.end());
    }
    return out;
}

double share_gap(const stats::VarianceDecomposition& a, const stats::VarianceDecomposition& b) {
    return std::max({std::abs(a.ps - b.ps), std::abs(a.as_share - b.as_share), std::abs(a.mu - b.mu)});
}

}  // namespace

std::vector<Check> verify_dataset(const NestedDataset& d, const std::string& label) {
    std::vector<Check> out;
    auto add = [&](const std::string& name, bool ok, std::string detail) {
        out.push_back({label + ": " + name, ok, std::move(detail)});
    };
    try {
        d.validate();
        add("structure", true, std::to_string(d.n_intents()) + " intents, " + std::to_string(d.n_prompts()) +
                                   " prompts, " + std::to_string(d.n_obs()) + " obs");
    } catch (const Error& e) {
        add("structure", false, e.what());
        return out;
    }
    stats::VarianceDecomposition r;
    try {
        r = stats::decompose_variance(d);
    } catch (const Error& e) {
        if (e.code() != Errc::ZeroDispersion) throw;
        add("decomposition", true, "zero dispersion; shares undefined");
        return out;
    }
    const double sum = r.ps + r.as_share + r.mu;
    add("unit-sum", std::abs(sum - 1.0) <= 1e-9, "ps+as+mu = " + num(sum));
    const bool bounded = r.ps >= 0 && r.ps <= 1 && r.as_share >= 0 && r.as_share <= 1 && r.mu >= 0 && r.mu <= 1;
    add("share bounds", bounded, "shares " + report::format_shares(r.ps, r.as_share, r.mu));
    if (r.mvs) add("mvs bounds", *r.mvs >= 0 && *r.mvs <= 1, "mvs " + num(*r.mvs));

    const auto direct = direct_components(d);
    const double scale = std::max(r.total_variance, 1e-300);
    const double gap = std::max({std::abs(direct[0] - r.ps_raw), std::abs(direct[1] - r.as_raw),
                                 std::abs(direct[2] - r.mu_raw)}) / scale;
    add("direct double-sum agreement", gap <= 1e-9, "max relative gap " + num(gap));

    const double g_scale = share_gap(r, stats::decompose_variance(transformed(d, 7.25, 0.0)));
    add("scale invariance", g_scale <= 1e-9, "max share change " + num(g_scale));
    const double g_shift = share_gap(r, stats::decompose_variance(transformed(d, 1.0, 1000.0)));
    add("shift invariance", g_shift <= 1e-6, "max share change " + num(g_shift));
    const double g_perm = share_gap(r, stats::decompose_variance(reversed(d)));
    add("permutation invariance", g_perm <= 1e-9, "max share change " + num(g_perm));
    const auto std_r = stats::decompose_variance(stats::standardize(d));
    add("standardized total variance", std::abs(std_r.total_variance - 1.0) <= 1e-9,
        "total " + num(std_r.total_variance));
    return out;
}

std::vector<Check> verify_run(const fs::path& run_dir) {
    std::vector<Check> out;
    const auto manifest = store::load_manifest(run_dir);
    const auto records = store::load_records(run_dir / store::kResponsesFile);

    bool ids_ok = true;
    for (const auto& r : records) ids_ok = ids_ok && r.run_id == manifest.run_id;
    out.push_back({"records belong to run", ids_ok, manifest.run_id});

    // Slots of each cell must be exactly 0..n-1.
    std::map<std::tuple<std::string, std::size_t, std::string>, std::vector<std::size_t>> slots;
    for (const auto& r : records)
        if (r.slot) slots[{r.task_id, r.intent_index, r.variant_id}].push_back(*r.slot);
    bool slots_ok = true;
    for (auto& [cell, s] : slots) {
        std::sort(s.begin(), s.end());
        for (std::size_t k = 0; k < s.size(); ++k) slots_ok = slots_ok && s[k] == k;
    }
    out.push_back({"slot integrity", slots_ok, std::to_string(slots.size()) + " cells"});

    bool counts_ok = true;
    std::string counts_detail = "counts match records";
    for (const auto& [task_id, c] : manifest.counts) {
        const auto fresh = count_task(records, task_id, c.planned_cells, manifest.responses_per_cell);
        if (!(fresh == c)) {
            counts_ok = false;
            counts_detail = "manifest counts for '" + task_id + "' disagree with records";
        }
    }
    out.push_back({"manifest counts", counts_ok, counts_detail});
    out.push_back({"manifest status", manifest.status != store::RunStatus::Complete || all_full(manifest),
                   std::string(store::to_string(manifest.status))});

    std::map<std::string, NestedDataset> datasets;
    for (const auto& [task_id, c] : manifest.counts) {
        try {
            datasets.emplace(task_id, collect::build_dataset(records, task_id));
        } catch (const Error& e) {
            out.push_back({task_id + ": structure", false, e.what()});
        }
    }
    for (const auto& [task_id, d] : datasets) {
        auto checks = verify_dataset(d, task_id);
        out.insert(out.end(), checks.begin(), checks.end());
    }

    const fs::path results_path = run_dir / store::kResultsFile;
    if (fs::exists(results_path)) {
        const auto results = store::load_results(results_path);
        for (const auto& t : results.tasks) {
            auto it = datasets.find(t.task_id);
            if (it == datasets.end()) {
                out.push_back({t.task_id + ": results.json agreement", false, "task has no dataset"});
                continue;
            }
            const auto fresh = stats::decompose_variance(it->second);
            const double gap = std::max(share_gap(fresh, t.decomposition),
                                        std::abs(fresh.total_variance - t.decomposition.total_variance) /
                                            std::max(fresh.total_variance, 1e-300));
            out.push_back({t.task_id + ": results.json agreement", gap <= 1e-12, "max gap " + num(gap)});
        }
    }
    return out;
}

nlohmann::json serve_chat_request(ChatBackend& backend, const nlohmann::json& body,
                                  std::map<std::string, std::int64_t>& counters) {
    if (!body.is_object() || !body.contains("messages") || !body["messages"].is_array())
        throw Error(Errc::InvalidArgument, "request body lacks a messages array");
    ChatRequest r;
    r.model_id = body.value("model", "");
    for (const auto& m : body["messages"]) {
        const std::string role = m.value("role", "");
        const std::string content = m.value("content", "");
        if (role == "system")
            r.system = content;
        else if (role == "user")
            r.user = content;
    }
    r.temperature = body.value("temperature", 1.0);
    r.max_tokens = body.value("max_tokens", 600);
    if (body.contains("seed") && body["seed"].is_number_integer()) {
        r.seed_hint = body["seed"].get<std::int64_t>();
    } else {
        r.seed_hint = counters[request_key(r)]++;
    }
    const auto c = backend.complete(r);
    return nlohmann::json{
        {"object", "chat.completion"},
        {"model", r.model_id},
        {"choices", nlohmann::json::array({nlohmann::json{{"index", 0},
                                                          {"message", {{"role", "assistant"}, {"content", c.text}}},
                                                          {"finish_reason", "stop"}}})}};
}

}  // namespace wmprobe::pipeline
