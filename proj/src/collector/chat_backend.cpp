// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "wmprobe/chat_backend.hpp"

#include <cstdio>

#include "wmprobe/error.hpp"
#include "wmprobe/rng.hpp"
#include "wmprobe/json_file.hpp"

namespace wmprobe {

using nlohmann::json;

void ChatRequest::validate() const {
    if (!(temperature >= 0.0)) throw Error(Errc::InvalidArgument, "temperature must be >= 0");
    if (max_tokens <= 0) throw Error(Errc::InvalidArgument, "max_tokens must be positive");
}

std::string canonical_request(const ChatRequest& r) {
    json j;
    j["model"] = r.model_id;
    j["system"] = r.system ? json(*r.system) : json(nullptr);
    j["user"] = r.user;
    j["temperature"] = r.temperature;
    j["max_tokens"] = r.max_tokens;
    j["seed_hint"] = r.seed_hint ? json(*r.seed_hint) : json(nullptr);
    return j.dump();
}

std::string request_key(const ChatRequest& r) {
    const std::uint64_t h = hash_string(canonical_request(r));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ReplayBackend ReplayBackend::load(const std::filesystem::path& path) {
    const json j = read_json_file(path);
    if (!j.is_object() || !j.contains("entries") || !j["entries"].is_object())
        throw Error(Errc::SchemaError, path.string() + ": replay fixture needs an 'entries' object");
    if (j.value("schema_version", 0) != 1)
        throw Error(Errc::SchemaError, path.string() + ": unsupported replay fixture schema_version");
    std::map<std::string, std::string> fixtures;
    for (const auto& [key, value] : j["entries"].items()) {
        if (!value.is_string()) throw Error(Errc::SchemaError, path.string() + ": entries/" + key + " is not a string");
        fixtures.emplace(key, value.get<std::string>());
    }
    return ReplayBackend(std::move(fixtures));
}

Completion ReplayBackend::complete(const ChatRequest& request) {
    const std::string key = request_key(request);
    auto it = fixtures_.find(key);
    if (it == fixtures_.end()) throw Error(Errc::BackendError, "no replay fixture for request " + key);
    return {it->second, "replay:" + key};
}

Completion RecordingBackend::complete(const ChatRequest& request) {
    Completion c = inner_.complete(request);
    std::lock_guard lock(mu_);
    recorded_[request_key(request)] = c.text;
    return c;
}

std::map<std::string, std::string> RecordingBackend::fixtures() const {
    std::lock_guard lock(mu_);
    return recorded_;
}

void RecordingBackend::save(const std::filesystem::path& path) const { save_replay_fixture(path, fixtures()); }

void save_replay_fixture(const std::filesystem::path& path, const std::map<std::string, std::string>& fixtures) {
    json j;
    j["record_type"] = "replay_fixture";
    j["schema_version"] = 1;
    j["entries"] = json::object();
    for (const auto& [k, v] : fixtures) j["entries"][k] = v;
    write_json_file(path, j);
}

}  // namespace wmprobe
