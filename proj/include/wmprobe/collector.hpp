// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wmprobe/chat_backend.hpp"
#include "wmprobe/error.hpp"
#include "wmprobe/extractor.hpp"
#include "wmprobe/nested_dataset.hpp"
#include "wmprobe/task_spec.hpp"

namespace wmprobe::collect {

struct CollectionPlan {
    std::string run_id = "run";
    std::string model_id;
    TaskSpec task;
    std::vector<PromptVariant> variants;
    std::size_t n_intents = 0;  // 0 means every intent value of the task
    std::size_t responses_per_cell = 50;
    std::size_t max_attempts_per_cell = 250;
    double temperature = 1.0;
    int max_tokens = 600;
    std::optional<std::string> system;  // elicitation runs without one by default
    std::size_t max_in_flight = 1;

    std::size_t intent_count() const { return n_intents ? n_intents : task.intent_values.size(); }

    /// Throws Error(InvalidArgument) on an unusable plan.
    void validate() const;
};

/// One elicited answer. Retained records carry a slot and a value; discarded
/// ones keep the raw text and the discard reason for audit.
struct ResponseRecord {
    std::string run_id;
    std::string task_id;
    std::size_t intent_index = 0;
    std::string variant_id;
    std::optional<std::size_t> slot;
    std::string raw_text;
    std::optional<double> extracted;
    std::optional<extract::DiscardReason> discard_reason;
    std::size_t attempt = 0;
    std::string backend_meta;

    bool retained() const noexcept { return extracted.has_value(); }

    friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

/// Substitutes the intent value for the placeholder. Survey variants may use
/// the task's survey placeholder instead. Throws MissingPlaceholder.
std::string render_prompt(const TaskSpec& task, const PromptVariant& variant, std::size_t intent_index);

/// The request issued for a given attempt; seed_hint carries the attempt.
ChatRequest elicitation_request(const CollectionPlan& plan, const std::string& prompt, std::size_t attempt);

/// Elicits until `responses_per_cell` answers extract to a value.
/// `prior` holds records already persisted for this cell; collection resumes
/// after them. Throws CellBudgetExceeded once max_attempts_per_cell attempts
/// have been spent; BackendError propagates.
std::vector<ResponseRecord> collect_cell(const CollectionPlan& plan, std::size_t intent_index,
                                         const PromptVariant& variant, ChatBackend& backend,
                                         const extract::Extractor& extractor,
                                         std::span<const ResponseRecord> prior = {});

struct CellFailure {
    std::size_t intent_index = 0;
    std::string variant_id;
    Errc code = Errc::BackendError;
    std::string message;
};

struct TaskCollection {
    std::vector<ResponseRecord> records;  // prior + new, in cell order
    std::vector<CellFailure> failures;
    std::optional<NestedDataset> dataset;  // set only when every cell is full

    bool complete() const noexcept { return failures.empty() && dataset.has_value(); }
};

using RecordSink = std::function<void(std::span<const ResponseRecord>)>;

/// Runs every (intent, variant) cell. New records of each finished cell are
/// handed to `sink` in (intent_index, plan variant order) order, whatever
/// order the cells completed in. Cells already full in `prior` are skipped.
TaskCollection collect_task(const CollectionPlan& plan, ChatBackend& backend, const extract::Extractor& extractor,
                            const RecordSink& sink = {}, std::span<const ResponseRecord> prior = {});

/// Rebuilds the nested dataset of one task from retained records: intents by
/// index, prompts by variant_id, values by slot. Throws InvalidDataset when
/// the records do not form a valid dataset.
NestedDataset build_dataset(std::span<const ResponseRecord> records, std::string_view task_id);

}  // namespace wmprobe::collect
