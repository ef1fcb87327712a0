// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace wmprobe {

struct ChatRequest {
    std::string model_id;
    std::optional<std::string> system;
    std::string user;
    double temperature = 1.0;
    int max_tokens = 600;
    std::optional<std::int64_t> seed_hint;

    /// Throws Error(InvalidArgument) on negative temperature or non-positive
    /// max_tokens.
    void validate() const;
};

/// Canonical JSON text of a request (sorted keys, shortest round-trip numbers).
std::string canonical_request(const ChatRequest& r);

/// 16 hex digits of FNV-1a/64 over canonical_request(r).
std::string request_key(const ChatRequest& r);

struct Completion {
    std::string text;
    std::string meta;  // backend-specific, opaque
};

/// Source of chat completions. Implementations must tolerate concurrent
/// calls to complete().
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual Completion complete(const ChatRequest& request) = 0;
    virtual std::string_view kind() const noexcept = 0;
};

/// Answers from a fixture map keyed by request_key(); unknown requests raise
/// BackendError.
class ReplayBackend final : public ChatBackend {
public:
    explicit ReplayBackend(std::map<std::string, std::string> fixtures) : fixtures_(std::move(fixtures)) {}

    static ReplayBackend load(const std::filesystem::path& path);

    Completion complete(const ChatRequest& request) override;
    std::string_view kind() const noexcept override { return "replay"; }
    std::size_t size() const noexcept { return fixtures_.size(); }

private:
    std::map<std::string, std::string> fixtures_;
};

/// Forwards to another backend and remembers every exchange so it can be
/// written out as a replay fixture.
class RecordingBackend final : public ChatBackend {
public:
    explicit RecordingBackend(ChatBackend& inner) : inner_(inner) {}

    Completion complete(const ChatRequest& request) override;
    std::string_view kind() const noexcept override { return inner_.kind(); }

    std::map<std::string, std::string> fixtures() const;
    void save(const std::filesystem::path& path) const;

private:
    ChatBackend& inner_;
    mutable std::mutex mu_;
    std::map<std::string, std::string> recorded_;
};

void save_replay_fixture(const std::filesystem::path& path, const std::map<std::string, std::string>& fixtures);

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{500};
    std::chrono::milliseconds max_delay{30'000};
    std::uint64_t jitter_seed = 0;
};

struct LiveConfig {
    std::string base_url;  // e.g. https://openrouter.ai/api/v1
    std::string api_key;
    RetryPolicy retry;
    double max_requests_per_second = 0.0;  // 0 disables the cap
    std::chrono::seconds timeout{120};
    bool send_seed = false;

    /// Reads WMPROBE_API_URL and WMPROBE_API_KEY. Throws Error(InvalidArgument)
    /// when the URL is unset.
    static LiveConfig from_env();
};

/// Splits "scheme://host[:port]/prefix" into the origin and path prefix.
std::pair<std::string, std::string> split_base_url(std::string_view url);

/// OpenAI-compatible chat-completions client over HTTP(S).
///
/// Transport failures, 429 and 5xx answers are retried with exponential
/// backoff and jitter; other 4xx answers fail immediately.
class LiveBackend final : public ChatBackend {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit LiveBackend(LiveConfig config, Sleeper sleeper = {});
    ~LiveBackend() override;

    Completion complete(const ChatRequest& request) override;
    std::string_view kind() const noexcept override { return "live"; }

    std::uint64_t request_count() const noexcept;

    /// Body sent to /chat/completions for `request`.
    static std::string wire_body(const ChatRequest& request, bool send_seed);

private:
    struct State;
    LiveConfig config_;
    Sleeper sleeper_;
    std::unique_ptr<State> state_;
};

}  // namespace wmprobe
