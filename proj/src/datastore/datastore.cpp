// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "wmprobe/datastore.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <set>
#include <sstream>

#include "wmprobe/error.hpp"
#include "wmprobe/json_file.hpp"

namespace wmprobe::store {

using nlohmann::json;

namespace {

[[noreturn]] void schema_fail(const std::string& path, const std::string& what) {
    throw Error(Errc::SchemaError, path + ": " + what);
}

// Typed field access that reports the offending path.
class Fields {
public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) schema_fail(path_, "expected an object");
    }

    const json& at(const char* key) const {
        auto it = j_.find(key);
        if (it == j_.end()) schema_fail(sub(key), "missing field");
        return *it;
    }
    bool has(const char* key) const {
        auto it = j_.find(key);
        return it != j_.end() && !it->is_null();
    }
    std::string sub(const char* key) const { return path_ + "." + key; }

    std::string str(const char* key) const {
        const auto& v = at(key);
        if (!v.is_string()) schema_fail(sub(key), "expected a string");
        return v.get<std::string>();
    }
    std::optional<std::string> opt_str(const char* key) const {
        if (!has(key)) return std::nullopt;
        return str(key);
    }
    double num(const char* key) const {
        const auto& v = at(key);
        if (!v.is_number()) schema_fail(sub(key), "expected a number");
        return v.get<double>();
    }
    std::optional<double> opt_num(const char* key) const {
        if (!has(key)) return std::nullopt;
        return num(key);
    }
    std::uint64_t count(const char* key) const {
        const auto& v = at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
            schema_fail(sub(key), "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }
    std::optional<std::uint64_t> opt_count(const char* key) const {
        if (!has(key)) return std::nullopt;
        return count(key);
    }
    bool boolean(const char* key) const {
        const auto& v = at(key);
        if (!v.is_boolean()) schema_fail(sub(key), "expected a boolean");
        return v.get<bool>();
    }
    const json& array(const char* key) const {
        const auto& v = at(key);
        if (!v.is_array()) schema_fail(sub(key), "expected an array");
        return v;
    }
    const json& object(const char* key) const {
        const auto& v = at(key);
        if (!v.is_object()) schema_fail(sub(key), "expected an object");
        return v;
    }

    const std::string& path() const { return path_; }

private:
    const json& j_;
    std::string path_;
};

void check_header(const Fields& f, std::string_view record_type) {
    const auto version = f.at("schema_version");
    if (!version.is_number_integer() || version.get<std::int64_t>() != kSchemaVersion)
        schema_fail(f.sub("schema_version"), "unsupported schema version " + version.dump());
    if (f.str("record_type") != record_type)
        schema_fail(f.sub("record_type"), "expected '" + std::string(record_type) + "'");
}

json header(std::string_view record_type) {
    return json{{"record_type", record_type}, {"schema_version", kSchemaVersion}};
}

std::vector<double> number_array(const json& a, const std::string& path) {
    if (!a.is_array()) schema_fail(path, "expected an array");
    std::vector<double> out;
    out.reserve(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (!a[k].is_number()) schema_fail(path + "[" + std::to_string(k) + "]", "expected a number");
        out.push_back(a[k].get<double>());
    }
    return out;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Malformed UTF-8 in model output must not make a record unwritable.
std::string dump_line(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

}  // namespace

// --- suite -----------------------------------------------------------------------

const TaskSpec& TaskSuite::find(std::string_view task_id) const {
    for (const auto& t : tasks)
        if (t.task_id == task_id) return t;
    throw Error(Errc::InvalidArgument, "unknown task '" + std::string(task_id) + "'");
}

json task_to_json(const TaskSpec& t) {
    json values = json::array();
    for (const auto& v : t.intent_values) {
        if (v.is_number)
            values.push_back(json::parse(v.text));
        else
            values.push_back(v.text);
    }
    json j{{"task_id", t.task_id},
           {"category", to_string(t.category)},
           {"template", t.template_text},
           {"intent_values", values},
           {"extraction_instruction", t.extraction_instruction},
           {"unit", t.unit}};
    j["survey_scenario"] = t.survey_scenario ? json(*t.survey_scenario) : json(nullptr);
    j["survey_placeholder"] = t.survey_placeholder ? json(*t.survey_placeholder) : json(nullptr);
    return j;
}

TaskSpec task_from_json(const json& j, const std::string& path) {
    Fields f(j, path);
    TaskSpec t;
    t.task_id = f.str("task_id");
    try {
        t.category = category_from_string(f.str("category"));
    } catch (const Error& e) {
        schema_fail(f.sub("category"), e.what());
    }
    t.template_text = f.str("template");
    const auto& values = f.array("intent_values");
    for (std::size_t k = 0; k < values.size(); ++k) {
        const auto& v = values[k];
        if (v.is_string())
            t.intent_values.push_back({v.get<std::string>(), false});
        else if (v.is_number())
            t.intent_values.push_back({v.dump(), true});
        else
            schema_fail(f.sub("intent_values") + "[" + std::to_string(k) + "]", "expected a string or number");
    }
    t.extraction_instruction = f.str("extraction_instruction");
    t.survey_scenario = f.opt_str("survey_scenario");
    t.survey_placeholder = f.opt_str("survey_placeholder");
    t.unit = f.str("unit");
    try {
        t.validate();
    } catch (const Error& e) {
        schema_fail(path, e.what());
    }
    return t;
}

TaskSuite parse_suite(const json& j) {
    Fields f(j, "suite");
    check_header(f, "task_suite");
    TaskSuite s;
    s.version = f.str("version");
    const auto& tasks = f.array("tasks");
    std::set<std::string> seen;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        auto t = task_from_json(tasks[k], "suite.tasks[" + std::to_string(k) + "]");
        if (!seen.insert(t.task_id).second) throw Error(Errc::DuplicateTaskId, "task id '" + t.task_id + "' repeats");
        s.tasks.push_back(std::move(t));
    }
    return s;
}

TaskSuite load_suite(const std::filesystem::path& path) { return parse_suite(read_json_file(path)); }

json suite_to_json(const TaskSuite& suite) {
    json j = header("task_suite");
    j["version"] = suite.version;
    j["tasks"] = json::array();
    for (const auto& t : suite.tasks) j["tasks"].push_back(task_to_json(t));
    return j;
}

// --- variants ----------------------------------------------------------------------

json variant_to_json(const PromptVariant& v, const std::string& task_id) {
    json j = header("prompt_variant");
    j["task_id"] = task_id;
    j["variant_id"] = v.variant_id;
    j["text"] = v.text;
    j["origin"] = json{{"kind", to_string(v.origin.kind)}, {"langs", v.origin.langs}};
    j["verified"] = v.verified;
    j["embedding"] = v.embedding ? json(*v.embedding) : json(nullptr);
    return j;
}

PromptVariant variant_from_json(const json& j, const std::string& path) {
    Fields f(j, path);
    check_header(f, "prompt_variant");
    PromptVariant v;
    v.variant_id = f.str("variant_id");
    v.text = f.str("text");
    Fields o(f.object("origin"), f.sub("origin"));
    const auto kind = o.str("kind");
    if (kind == "base")
        v.origin.kind = OriginKind::Base;
    else if (kind == "translation_chain")
        v.origin.kind = OriginKind::TranslationChain;
    else if (kind == "survey")
        v.origin.kind = OriginKind::Survey;
    else
        schema_fail(o.sub("kind"), "unknown origin '" + kind + "'");
    for (const auto& l : o.array("langs")) {
        if (!l.is_string()) schema_fail(o.sub("langs"), "expected strings");
        v.origin.langs.push_back(l.get<std::string>());
    }
    v.verified = f.boolean("verified");
    if (f.has("embedding")) v.embedding = number_array(f.at("embedding"), f.sub("embedding"));
    return v;
}

void save_variants(const std::filesystem::path& path, const std::string& task_id,
                   std::span<const PromptVariant> variants, bool append) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
    if (!out) throw Error(Errc::Io, "cannot write " + path.string());
    for (const auto& v : variants) out << dump_line(variant_to_json(v, task_id)) << '\n';
    if (!out) throw Error(Errc::Io, "short write to " + path.string());
}

std::map<std::string, std::vector<PromptVariant>> load_variants(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open " + path.string());
    std::map<std::string, std::vector<PromptVariant>> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw CorruptLineError(n, e.what());
        }
        const std::string where = path.filename().string() + ":" + std::to_string(n);
        Fields f(j, where);
        out[f.str("task_id")].push_back(variant_from_json(j, where));
    }
    return out;
}

// --- records -------------------------------------------------------------------------

json record_to_json(const collect::ResponseRecord& r) {
    json j = header("response");
    j["run_id"] = r.run_id;
    j["task_id"] = r.task_id;
    j["intent_index"] = r.intent_index;
    j["variant_id"] = r.variant_id;
    j["slot"] = r.slot ? json(*r.slot) : json(nullptr);
    j["raw_text"] = r.raw_text;
    j["extracted"] = opt(r.extracted);
    j["discard_reason"] = r.discard_reason ? json(extract::to_string(*r.discard_reason)) : json(nullptr);
    j["attempt"] = r.attempt;
    j["backend_meta"] = r.backend_meta;
    return j;
}

collect::ResponseRecord record_from_json(const json& j, const std::string& path) {
    Fields f(j, path);
    check_header(f, "response");
    collect::ResponseRecord r;
    r.run_id = f.str("run_id");
    r.task_id = f.str("task_id");
    r.intent_index = f.count("intent_index");
    r.variant_id = f.str("variant_id");
    r.slot = f.opt_count("slot");
    r.raw_text = f.str("raw_text");
    r.extracted = f.opt_num("extracted");
    if (auto reason = f.opt_str("discard_reason")) {
        try {
            r.discard_reason = extract::discard_reason_from_string(*reason);
        } catch (const Error& e) {
            schema_fail(f.sub("discard_reason"), e.what());
        }
    }
    r.attempt = f.count("attempt");
    r.backend_meta = f.str("backend_meta");
    if (r.extracted.has_value() == r.discard_reason.has_value())
        schema_fail(path, "exactly one of extracted / discard_reason must be set");
    if (r.extracted.has_value() != r.slot.has_value()) schema_fail(path, "slot must accompany an extracted value");
    return r;
}

RecordWriter::RecordWriter(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | std::ios::app);
    if (!out_) throw Error(Errc::Io, "cannot open " + path.string() + " for append");
}

void RecordWriter::append(std::span<const collect::ResponseRecord> records) {
    std::string buf;
    for (const auto& r : records) {
        buf += dump_line(record_to_json(r));
        buf += '\n';
    }
    std::lock_guard lock(mu_);
    out_ << buf;
    out_.flush();
    if (!out_) throw Error(Errc::Io, "append failed");
}

namespace {

RecordLoad read_records(const std::filesystem::path& path, bool lenient) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open " + path.string());
    RecordLoad out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            out.records.push_back(record_from_json(j, "line " + std::to_string(n)));
        } catch (const std::exception& e) {
            if (!lenient) throw CorruptLineError(n, e.what());
            out.corrupt_line = n;
            break;
        }
    }
    for (const auto& r : out.records)
        if (r.run_id != out.records.front().run_id)
            throw Error(Errc::MixedRun, "records from runs '" + out.records.front().run_id + "' and '" + r.run_id +
                                            "' in " + path.string());
    return out;
}

}  // namespace

std::vector<collect::ResponseRecord> load_records(const std::filesystem::path& path) {
    return read_records(path, false).records;
}

RecordLoad load_records_lenient(const std::filesystem::path& path) { return read_records(path, true); }

std::size_t repair_records(const std::filesystem::path& path) {
    auto loaded = load_records_lenient(path);
    if (!loaded.corrupt_line) return loaded.records.size();
    std::string text;
    for (const auto& r : loaded.records) text += dump_line(record_to_json(r)) + "\n";
    write_text_file(path, text);
    return loaded.records.size();
}

NestedDataset load_dataset(const std::filesystem::path& run_dir, const std::string& task_id) {
    const auto records = load_records(run_dir / kResponsesFile);
    return collect::build_dataset(records, task_id);
}

std::vector<collect::ResponseRecord> load_audit(const std::filesystem::path& run_dir, const std::string& task_id) {
    std::vector<collect::ResponseRecord> out;
    for (auto& r : load_records(run_dir / kResponsesFile))
        if (r.task_id == task_id) out.push_back(std::move(r));
    return out;
}

// --- datasets ----------------------------------------------------------------------------

json dataset_to_json(const NestedDataset& d) {
    json j = header("dataset");
    j["mode"] = d.mode == DatasetMode::Numeric ? "numeric" : "categorical";
    j["intents"] = json::array();
    for (const auto& intent : d.intents) {
        json ji{{"intent_id", intent.intent_id}, {"prompts", json::array()}};
        for (const auto& p : intent.prompts) {
            json jp{{"prompt_id", p.prompt_id}};
            if (d.mode == DatasetMode::Numeric)
                jp["values"] = p.values;
            else
                jp["labels"] = p.labels;
            ji["prompts"].push_back(std::move(jp));
        }
        j["intents"].push_back(std::move(ji));
    }
    return j;
}

NestedDataset dataset_from_json(const json& j) {
    Fields f(j, "dataset");
    check_header(f, "dataset");
    NestedDataset d;
    const auto mode = f.str("mode");
    if (mode == "numeric")
        d.mode = DatasetMode::Numeric;
    else if (mode == "categorical")
        d.mode = DatasetMode::Categorical;
    else
        schema_fail(f.sub("mode"), "unknown mode '" + mode + "'");
    const auto& intents = f.array("intents");
    for (std::size_t a = 0; a < intents.size(); ++a) {
        Fields fi(intents[a], f.sub("intents") + "[" + std::to_string(a) + "]");
        IntentCell intent;
        intent.intent_id = fi.str("intent_id");
        const auto& prompts = fi.array("prompts");
        for (std::size_t b = 0; b < prompts.size(); ++b) {
            Fields fp(prompts[b], fi.sub("prompts") + "[" + std::to_string(b) + "]");
            PromptCell cell;
            cell.prompt_id = fp.str("prompt_id");
            if (d.mode == DatasetMode::Numeric) {
                cell.values = number_array(fp.array("values"), fp.sub("values"));
            } else {
                for (const auto& l : fp.array("labels")) {
                    if (!l.is_string()) schema_fail(fp.sub("labels"), "expected strings");
                    cell.labels.push_back(l.get<std::string>());
                }
            }
            intent.prompts.push_back(std::move(cell));
        }
        d.intents.push_back(std::move(intent));
    }
    d.validate();
    return d;
}

NestedDataset load_dataset_file(const std::filesystem::path& path) { return dataset_from_json(read_json_file(path)); }

void save_dataset_file(const std::filesystem::path& path, const NestedDataset& d) {
    write_json_file(path, dataset_to_json(d));
}

// --- manifest ---------------------------------------------------------------------------

std::string_view to_string(RunStatus s) noexcept {
    switch (s) {
    case RunStatus::Complete: return "complete";
    case RunStatus::Partial: return "partial";
    case RunStatus::Failed: return "failed";
    }
    return "unknown";
}

void RunManifest::validate() const {
    if (status != RunStatus::Complete) return;
    for (const auto& [task, c] : counts)
        if (c.complete_cells != c.planned_cells)
            throw Error(Errc::SchemaError, "manifest marks run complete but task '" + task + "' has " +
                                               std::to_string(c.complete_cells) + " of " +
                                               std::to_string(c.planned_cells) + " cells full");
}

json manifest_to_json(const RunManifest& m) {
    json j = header("run_manifest");
    j["run_id"] = m.run_id;
    j["suite_version"] = m.suite_version;
    j["model_id"] = m.model_id;
    j["backend_kind"] = m.backend_kind;
    j["seed"] = m.seed;
    j["created"] = m.created;
    j["updated"] = m.updated;
    j["status"] = to_string(m.status);
    j["responses_per_cell"] = m.responses_per_cell;
    j["counts"] = json::object();
    for (const auto& [task, c] : m.counts)
        j["counts"][task] = json{{"planned_cells", c.planned_cells},
                                 {"complete_cells", c.complete_cells},
                                 {"retained", c.retained},
                                 {"discarded", c.discarded}};
    return j;
}

RunManifest manifest_from_json(const json& j) {
    Fields f(j, "manifest");
    check_header(f, "run_manifest");
    RunManifest m;
    m.run_id = f.str("run_id");
    m.suite_version = f.str("suite_version");
    m.model_id = f.str("model_id");
    m.backend_kind = f.str("backend_kind");
    m.seed = f.count("seed");
    m.created = f.str("created");
    m.updated = f.str("updated");
    const auto status = f.str("status");
    if (status == "complete")
        m.status = RunStatus::Complete;
    else if (status == "partial")
        m.status = RunStatus::Partial;
    else if (status == "failed")
        m.status = RunStatus::Failed;
    else
        schema_fail(f.sub("status"), "unknown status '" + status + "'");
    m.responses_per_cell = f.count("responses_per_cell");
    const auto& counts = f.object("counts");
    for (const auto& [task, c] : counts.items()) {
        Fields fc(c, f.sub("counts") + "." + task);
        m.counts[task] = TaskCounts{fc.count("planned_cells"), fc.count("complete_cells"), fc.count("retained"),
                                    fc.count("discarded")};
    }
    m.validate();
    return m;
}

RunManifest load_manifest(const std::filesystem::path& run_dir) {
    return manifest_from_json(read_json_file(run_dir / kManifestFile));
}

void save_manifest(const std::filesystem::path& run_dir, const RunManifest& m) {
    m.validate();
    write_json_file(run_dir / kManifestFile, manifest_to_json(m));
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// --- results ------------------------------------------------------------------------------

namespace {

json interval_json(const stats::Interval& i) { return json::array({i.lower, i.upper}); }

stats::Interval interval_from(const json& j, const std::string& path) {
    auto v = number_array(j, path);
    if (v.size() != 2) schema_fail(path, "expected [lower, upper]");
    return {v[0], v[1]};
}

json decomposition_json(const stats::VarianceDecomposition& d) {
    return json{{"total_variance", d.total_variance},
                {"ps_raw", d.ps_raw},
                {"as_raw", d.as_raw},
                {"mu_raw", d.mu_raw},
                {"ps", d.ps},
                {"as", d.as_share},
                {"mu", d.mu},
                {"mvs", opt(d.mvs)},
                {"n_intents", d.n_intents},
                {"n_prompts", d.n_prompts},
                {"n_obs", d.n_obs}};
}

stats::VarianceDecomposition decomposition_from(const json& j, const std::string& path) {
    Fields f(j, path);
    stats::VarianceDecomposition d;
    d.total_variance = f.num("total_variance");
    d.ps_raw = f.num("ps_raw");
    d.as_raw = f.num("as_raw");
    d.mu_raw = f.num("mu_raw");
    d.ps = f.num("ps");
    d.as_share = f.num("as");
    d.mu = f.num("mu");
    d.mvs = f.opt_num("mvs");
    d.n_intents = f.count("n_intents");
    d.n_prompts = f.count("n_prompts");
    d.n_obs = f.count("n_obs");
    return d;
}

}  // namespace

json results_to_json(const RunResults& r) {
    json j = header("results");
    j["run_id"] = r.run_id;
    j["model_id"] = r.model_id;
    j["tasks"] = json::array();
    for (const auto& t : r.tasks) {
        json jt{{"task_id", t.task_id},
                {"category", t.category},
                {"unit", t.unit},
                {"decomposition", decomposition_json(t.decomposition)}};
        if (t.bootstrap) {
            const auto& b = *t.bootstrap;
            jt["bootstrap"] = json{{"replicates", b.replicates},
                                   {"skipped", b.skipped},
                                   {"level", b.level},
                                   {"seed", b.seed},
                                   {"ps", interval_json(b.ps)},
                                   {"as", interval_json(b.as_share)},
                                   {"mu", interval_json(b.mu)},
                                   {"mvs", b.mvs ? interval_json(*b.mvs) : json(nullptr)}};
        } else {
            jt["bootstrap"] = nullptr;
        }
        jt["cells"] = json::array();
        for (const auto& c : t.cells)
            jt["cells"].push_back(
                json{{"intent_id", c.intent_id}, {"prompt_id", c.prompt_id}, {"n", c.n}, {"mean", c.mean}});
        j["tasks"].push_back(std::move(jt));
    }
    return j;
}

RunResults results_from_json(const json& j) {
    Fields f(j, "results");
    check_header(f, "results");
    RunResults r;
    r.run_id = f.str("run_id");
    r.model_id = f.str("model_id");
    const auto& tasks = f.array("tasks");
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        Fields ft(tasks[k], f.sub("tasks") + "[" + std::to_string(k) + "]");
        TaskResult t;
        t.task_id = ft.str("task_id");
        t.category = ft.str("category");
        t.unit = ft.str("unit");
        t.decomposition = decomposition_from(ft.at("decomposition"), ft.sub("decomposition"));
        if (ft.has("bootstrap")) {
            Fields fb(ft.at("bootstrap"), ft.sub("bootstrap"));
            BootstrapSummary b;
            b.replicates = fb.count("replicates");
            b.skipped = fb.count("skipped");
            b.level = fb.num("level");
            b.seed = fb.count("seed");
            b.ps = interval_from(fb.at("ps"), fb.sub("ps"));
            b.as_share = interval_from(fb.at("as"), fb.sub("as"));
            b.mu = interval_from(fb.at("mu"), fb.sub("mu"));
            if (fb.has("mvs")) b.mvs = interval_from(fb.at("mvs"), fb.sub("mvs"));
            t.bootstrap = b;
        }
        const auto& cells = ft.array("cells");
        for (std::size_t c = 0; c < cells.size(); ++c) {
            Fields fc(cells[c], ft.sub("cells") + "[" + std::to_string(c) + "]");
            t.cells.push_back({fc.str("intent_id"), fc.str("prompt_id"), fc.count("n"), fc.num("mean")});
        }
        r.tasks.push_back(std::move(t));
    }
    return r;
}

RunResults load_results(const std::filesystem::path& path) { return results_from_json(read_json_file(path)); }

void save_results(const std::filesystem::path& path, const RunResults& r) {
    write_json_file(path, results_to_json(r));
}

}  // namespace wmprobe::store
