// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wmprobe/bootstrap.hpp"
#include "wmprobe/chat_backend.hpp"
#include "wmprobe/collector.hpp"
#include "wmprobe/datastore.hpp"
#include "wmprobe/extractor.hpp"
#include "wmprobe/promptgen.hpp"
#include "wmprobe/results.hpp"

namespace wmprobe::pipeline {

using VariantMap = std::map<std::string, std::vector<PromptVariant>>;

struct VariantSetOptions {
    std::size_t n = 10;  // candidates generated
    std::size_t k = 5;   // candidates kept
    std::uint64_t seed = 0;
    bool survey = false;
    promptgen::GenerationConfig generation;
};

/// The base template as v00000 followed by `k` diverse paraphrases picked
/// from `n` verified candidates (numbered from v00001 in generation order).
std::vector<PromptVariant> build_variant_set(const TaskSpec& task, const VariantSetOptions& options,
                                             ChatBackend& translator, ChatBackend& judge,
                                             promptgen::Embedder& embedder);

/// The base template alone, as a one-variant set.
PromptVariant base_variant(const TaskSpec& task);

struct CollectOptions {
    std::string run_id = "run";
    std::string model_id;
    std::string backend_kind;
    std::uint64_t seed = 0;
    std::size_t n_intents = 0;
    std::size_t responses_per_cell = 50;
    std::size_t max_attempts_per_cell = 250;
    double temperature = 1.0;
    int max_tokens = 600;
    std::size_t max_in_flight = 1;
    extract::ExtractorConfig extractor;
};

struct TaskFailure {
    std::string task_id;
    collect::CellFailure failure;
};

struct CollectSummary {
    store::RunManifest manifest;
    std::vector<TaskFailure> failures;
};

/// Collects every task in `variants` into `run_dir`, resuming from any
/// records already there. Writes variants.jsonl, appends responses.jsonl
/// cell by cell and keeps manifest.json current. Throws MixedRun when the
/// directory belongs to another run.
CollectSummary collect_run(const std::filesystem::path& run_dir, const store::TaskSuite& suite,
                           const VariantMap& variants, const CollectOptions& options, ChatBackend& model,
                           ChatBackend& extraction_backend);

/// Decomposes each task of the run (manifest order). Throws InvalidDataset
/// when the run is not complete, unless `allow_partial`.
RunResults decompose_run(const std::filesystem::path& run_dir, const store::TaskSuite& suite,
                         const std::optional<stats::BootstrapOptions>& bootstrap, bool allow_partial = false);

/// Datasets of every task in the run, keyed by task id.
std::map<std::string, NestedDataset> run_datasets(const std::filesystem::path& run_dir);

/// Re-runs extraction over stored raw answers and rewrites responses.jsonl
/// with fresh slots (attempt order within each cell). Returns the number of
/// records whose outcome changed.
std::size_t reextract_run(const std::filesystem::path& run_dir, const store::TaskSuite& suite,
                          ChatBackend& extraction_backend, const extract::ExtractorConfig& config = {});

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Invariant suite over a stored run: manifest/record consistency, slot
/// integrity, unit-sum, share bounds, scale/shift/permutation invariance,
/// agreement with a direct double-sum and with results.json when present.
std::vector<Check> verify_run(const std::filesystem::path& run_dir);

/// Same numeric checks on a single dataset.
std::vector<Check> verify_dataset(const NestedDataset& d, const std::string& label);

/// Answers one OpenAI-style chat-completions body with `backend`. When the
/// body carries no "seed", the per-prompt request count stands in for the
/// attempt index so repeated prompts still get fresh draws.
nlohmann::json serve_chat_request(ChatBackend& backend, const nlohmann::json& body,
                                  std::map<std::string, std::int64_t>& counters);

}  // namespace wmprobe::pipeline
