// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "wmprobe/collector.hpp"

#include <algorithm>
#include <future>
#include <map>
#include <set>

namespace wmprobe::collect {

void CollectionPlan::validate() const {
    task.validate();
    if (responses_per_cell < 1) throw Error(Errc::InvalidArgument, "responses_per_cell must be >= 1");
    if (max_attempts_per_cell < responses_per_cell)
        throw Error(Errc::InvalidArgument, "max_attempts_per_cell must be >= responses_per_cell");
    if (intent_count() < 2 || intent_count() > task.intent_values.size())
        throw Error(Errc::InvalidArgument, "plan must use between 2 and " +
                                               std::to_string(task.intent_values.size()) + " intents");
    if (variants.empty()) throw Error(Errc::InvalidArgument, "plan has no prompt variants");
    std::set<std::string> ids;
    for (const auto& v : variants)
        if (!ids.insert(v.variant_id).second)
            throw Error(Errc::InvalidArgument, "duplicate variant id '" + v.variant_id + "'");
    ChatRequest probe;
    probe.temperature = temperature;
    probe.max_tokens = max_tokens;
    probe.validate();
}

std::string render_prompt(const TaskSpec& task, const PromptVariant& variant, std::size_t intent_index) {
    if (intent_index >= task.intent_values.size())
        throw Error(Errc::InvalidArgument, "intent index " + std::to_string(intent_index) + " out of range");
    std::string token = task.placeholder();
    auto pos = variant.text.find(token);
    if (pos == std::string::npos && task.survey_placeholder) {
        token = *task.survey_placeholder;
        pos = variant.text.find(token);
    }
    if (pos == std::string::npos)
        throw Error(Errc::MissingPlaceholder, "variant '" + variant.variant_id + "' lost the placeholder " + token);
    std::string out = variant.text;
    out.replace(pos, token.size(), task.intent_values[intent_index].text);
    return out;
}

ChatRequest elicitation_request(const CollectionPlan& plan, const std::string& prompt, std::size_t attempt) {
    ChatRequest r;
    r.model_id = plan.model_id;
    r.system = plan.system;
    r.user = prompt;
    r.temperature = plan.temperature;
    r.max_tokens = plan.max_tokens;
    r.seed_hint = static_cast<std::int64_t>(attempt);
    return r;
}

namespace {

// Appends to `out` as it goes so a failing cell still leaves its records behind.
void run_cell(const CollectionPlan& plan, std::size_t intent_index, const PromptVariant& variant, ChatBackend& backend,
              const extract::Extractor& extractor, std::span<const ResponseRecord> prior,
              std::vector<ResponseRecord>& out) {
    const std::string prompt = render_prompt(plan.task, variant, intent_index);

    std::size_t filled = 0;
    std::size_t attempt = 0;
    for (const auto& r : prior) {
        if (r.retained()) ++filled;
        attempt = std::max(attempt, r.attempt + 1);
    }

    while (filled < plan.responses_per_cell) {
        if (attempt >= plan.max_attempts_per_cell)
            throw Error(Errc::CellBudgetExceeded, "cell (" + std::to_string(intent_index) + ", " + variant.variant_id +
                                                      ") filled " + std::to_string(filled) + " of " +
                                                      std::to_string(plan.responses_per_cell) + " slots in " +
                                                      std::to_string(attempt) + " attempts");
        Completion reply = backend.complete(elicitation_request(plan, prompt, attempt));
        const auto outcome = extractor(reply.text);

        ResponseRecord rec;
        rec.run_id = plan.run_id;
        rec.task_id = plan.task.task_id;
        rec.intent_index = intent_index;
        rec.variant_id = variant.variant_id;
        rec.raw_text = std::move(reply.text);
        rec.attempt = attempt;
        rec.backend_meta = std::move(reply.meta);
        if (outcome.discarded()) {
            rec.discard_reason = outcome.reason();
        } else {
            rec.slot = filled++;
            rec.extracted = outcome.value();
        }
        out.push_back(std::move(rec));
        ++attempt;
    }
}

struct CellJob {
    std::size_t intent_index;
    const PromptVariant* variant;
    std::vector<ResponseRecord> prior;
};

struct CellOutcome {
    std::vector<ResponseRecord> fresh;
    std::optional<CellFailure> failure;
};

}  // namespace

std::vector<ResponseRecord> collect_cell(const CollectionPlan& plan, std::size_t intent_index,
                                         const PromptVariant& variant, ChatBackend& backend,
                                         const extract::Extractor& extractor, std::span<const ResponseRecord> prior) {
    std::vector<ResponseRecord> out;
    run_cell(plan, intent_index, variant, backend, extractor, prior, out);
    return out;
}

TaskCollection collect_task(const CollectionPlan& plan, ChatBackend& backend, const extract::Extractor& extractor,
                            const RecordSink& sink, std::span<const ResponseRecord> prior) {
    plan.validate();

    std::map<std::pair<std::size_t, std::string>, std::vector<ResponseRecord>> prior_by_cell;
    for (const auto& r : prior)
        if (r.task_id == plan.task.task_id) prior_by_cell[{r.intent_index, r.variant_id}].push_back(r);

    std::vector<CellJob> jobs;
    for (std::size_t i = 0; i < plan.intent_count(); ++i)
        for (const auto& v : plan.variants) {
            auto it = prior_by_cell.find({i, v.variant_id});
            jobs.push_back({i, &v, it == prior_by_cell.end() ? std::vector<ResponseRecord>{} : it->second});
        }

    auto run = [&](const CellJob& job) {
        CellOutcome o;
        const auto retained = std::count_if(job.prior.begin(), job.prior.end(), [](const auto& r) { return r.retained(); });
        if (static_cast<std::size_t>(retained) >= plan.responses_per_cell) return o;
        try {
            run_cell(plan, job.intent_index, *job.variant, backend, extractor, job.prior, o.fresh);
        } catch (const Error& e) {
            o.failure = CellFailure{job.intent_index, job.variant->variant_id, e.code(), e.what()};
        }
        return o;
    };

    TaskCollection result;
    const std::size_t batch = std::max<std::size_t>(1, plan.max_in_flight);
    for (std::size_t start = 0; start < jobs.size(); start += batch) {
        const std::size_t end = std::min(jobs.size(), start + batch);
        std::vector<CellOutcome> outcomes;
        if (end - start == 1) {
            outcomes.push_back(run(jobs[start]));
        } else {
            std::vector<std::future<CellOutcome>> futures;
            for (std::size_t j = start; j < end; ++j) futures.push_back(std::async(std::launch::async, run, std::cref(jobs[j])));
            for (auto& f : futures) outcomes.push_back(f.get());
        }
        for (std::size_t j = start; j < end; ++j) {
            auto& o = outcomes[j - start];
            result.records.insert(result.records.end(), jobs[j].prior.begin(), jobs[j].prior.end());
            if (!o.fresh.empty() && sink) sink(o.fresh);
            result.records.insert(result.records.end(), o.fresh.begin(), o.fresh.end());
            if (o.failure) result.failures.push_back(std::move(*o.failure));
        }
    }

    if (result.failures.empty()) result.dataset = build_dataset(result.records, plan.task.task_id);
    return result;
}

NestedDataset build_dataset(std::span<const ResponseRecord> records, std::string_view task_id) {
    std::map<std::size_t, std::map<std::string, std::map<std::size_t, double>>> tree;
    for (const auto& r : records) {
        if (r.task_id != task_id || !r.retained()) continue;
        if (!r.slot) throw Error(Errc::InvalidDataset, "retained record without a slot");
        auto& cell = tree[r.intent_index][r.variant_id];
        if (!cell.emplace(*r.slot, *r.extracted).second)
            throw Error(Errc::InvalidDataset, "duplicate slot " + std::to_string(*r.slot) + " in cell (" +
                                                  std::to_string(r.intent_index) + ", " + r.variant_id + ")");
    }
    NestedDataset d;
    d.mode = DatasetMode::Numeric;
    for (auto& [intent_index, prompts] : tree) {
        IntentCell intent;
        intent.intent_id = std::to_string(intent_index);
        for (auto& [variant_id, slots] : prompts) {
            PromptCell cell;
            cell.prompt_id = variant_id;
            for (auto& [slot, value] : slots) cell.values.push_back(value);
            intent.prompts.push_back(std::move(cell));
        }
        d.intents.push_back(std::move(intent));
    }
    d.validate();
    return d;
}

}  // namespace wmprobe::collect
