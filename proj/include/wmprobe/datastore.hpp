// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "wmprobe/collector.hpp"
#include "wmprobe/nested_dataset.hpp"
#include "wmprobe/results.hpp"
#include "wmprobe/task_spec.hpp"

namespace wmprobe::store {

inline constexpr int kSchemaVersion = 1;

// Fixed filenames inside a run directory.
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kResponsesFile = "responses.jsonl";
inline constexpr const char* kVariantsFile = "variants.jsonl";
inline constexpr const char* kResultsFile = "results.json";

struct TaskSuite {
    std::string version;
    std::vector<TaskSpec> tasks;

    /// Throws Error(InvalidArgument) for an unknown id.
    const TaskSpec& find(std::string_view task_id) const;
};

/// Parses and checks a suite. Throws SchemaError (message names the field
/// path) or DuplicateTaskId.
TaskSuite parse_suite(const nlohmann::json& j);
TaskSuite load_suite(const std::filesystem::path& path);
nlohmann::json suite_to_json(const TaskSuite& suite);

nlohmann::json task_to_json(const TaskSpec& task);
TaskSpec task_from_json(const nlohmann::json& j, const std::string& path = "task");

// --- prompt variants (variants.jsonl) ---------------------------------------

nlohmann::json variant_to_json(const PromptVariant& v, const std::string& task_id);
PromptVariant variant_from_json(const nlohmann::json& j, const std::string& path = "variant");

void save_variants(const std::filesystem::path& path, const std::string& task_id,
                   std::span<const PromptVariant> variants, bool append = false);

/// Variants grouped by task id, in file order.
std::map<std::string, std::vector<PromptVariant>> load_variants(const std::filesystem::path& path);

// --- response records (responses.jsonl) --------------------------------------

nlohmann::json record_to_json(const collect::ResponseRecord& r);
collect::ResponseRecord record_from_json(const nlohmann::json& j, const std::string& path = "record");

/// Append-only writer; every append() is flushed before returning. A single
/// writer per file; appends are serialised.
class RecordWriter {
public:
    explicit RecordWriter(const std::filesystem::path& path);
    void append(std::span<const collect::ResponseRecord> records);

private:
    std::mutex mu_;
    std::ofstream out_;
};

struct RecordLoad {
    std::vector<collect::ResponseRecord> records;
    std::optional<std::size_t> corrupt_line;  // first bad line, 1-based
};

/// Reads every line; throws CorruptLineError at the first malformed line and
/// MixedRun when records carry different run ids.
std::vector<collect::ResponseRecord> load_records(const std::filesystem::path& path);

/// Like load_records but keeps the lines before the first malformed one.
RecordLoad load_records_lenient(const std::filesystem::path& path);

/// Drops everything from the first malformed line on; returns the number of
/// records kept.
std::size_t repair_records(const std::filesystem::path& path);

/// Dataset of `task_id` rebuilt from the run's retained records.
NestedDataset load_dataset(const std::filesystem::path& run_dir, const std::string& task_id);

/// Every record of `task_id`, discarded ones included.
std::vector<collect::ResponseRecord> load_audit(const std::filesystem::path& run_dir, const std::string& task_id);

// --- datasets -----------------------------------------------------------------

nlohmann::json dataset_to_json(const NestedDataset& d);
NestedDataset dataset_from_json(const nlohmann::json& j);
NestedDataset load_dataset_file(const std::filesystem::path& path);
void save_dataset_file(const std::filesystem::path& path, const NestedDataset& d);

// --- run manifest ---------------------------------------------------------------

enum class RunStatus { Complete, Partial, Failed };
std::string_view to_string(RunStatus s) noexcept;

struct TaskCounts {
    std::size_t planned_cells = 0;
    std::size_t complete_cells = 0;
    std::size_t retained = 0;
    std::size_t discarded = 0;

    friend bool operator==(const TaskCounts&, const TaskCounts&) = default;
};

struct RunManifest {
    std::string run_id;
    std::string suite_version;
    std::string model_id;
    std::string backend_kind;
    std::uint64_t seed = 0;
    std::string created;
    std::string updated;
    RunStatus status = RunStatus::Partial;
    std::size_t responses_per_cell = 0;
    std::map<std::string, TaskCounts> counts;

    /// Throws SchemaError when status is complete but a task has unfilled cells.
    void validate() const;

    friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);
RunManifest load_manifest(const std::filesystem::path& run_dir);
void save_manifest(const std::filesystem::path& run_dir, const RunManifest& m);

/// UTC, ISO 8601 with seconds.
std::string utc_timestamp();

// --- results ---------------------------------------------------------------------

nlohmann::json results_to_json(const RunResults& r);
RunResults results_from_json(const nlohmann::json& j);
RunResults load_results(const std::filesystem::path& path);
void save_results(const std::filesystem::path& path, const RunResults& r);

}  // namespace wmprobe::store
