// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "wmprobe/chat_backend.hpp"
#include "wmprobe/error.hpp"
#include "wmprobe/rng.hpp"

namespace wmprobe {

using nlohmann::json;

LiveConfig LiveConfig::from_env() {
    LiveConfig c;
    const char* url = std::getenv("WMPROBE_API_URL");
    if (url == nullptr || *url == '\0') throw Error(Errc::InvalidArgument, "WMPROBE_API_URL is not set");
    c.base_url = url;
    if (const char* key = std::getenv("WMPROBE_API_KEY")) c.api_key = key;
    return c;
}

std::pair<std::string, std::string> split_base_url(std::string_view url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos)
        throw Error(Errc::InvalidArgument, "base URL needs a scheme: " + std::string(url));
    const auto path_start = url.find('/', scheme_end + 3);
    std::string origin(url.substr(0, path_start));
    std::string prefix = path_start == std::string_view::npos ? std::string() : std::string(url.substr(path_start));
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {origin, prefix};
}

struct LiveBackend::State {
    std::string origin;
    std::string prefix;
    std::atomic<std::uint64_t> requests{0};
    std::mutex jitter_mu;
    Rng jitter;
    std::mutex rate_mu;
    std::chrono::steady_clock::time_point next_slot{};

    explicit State(std::uint64_t seed) : jitter(seed) {}
};

LiveBackend::LiveBackend(LiveConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleeper_(std::move(sleeper)), state_(std::make_unique<State>(config_.retry.jitter_seed)) {
    auto [origin, prefix] = split_base_url(config_.base_url);
    state_->origin = std::move(origin);
    state_->prefix = std::move(prefix);
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

LiveBackend::~LiveBackend() = default;

std::uint64_t LiveBackend::request_count() const noexcept { return state_->requests.load(); }

std::string LiveBackend::wire_body(const ChatRequest& request, bool send_seed) {
    json messages = json::array();
    if (request.system) messages.push_back({{"role", "system"}, {"content", *request.system}});
    messages.push_back({{"role", "user"}, {"content", request.user}});
    json body = {{"model", request.model_id},
                 {"messages", messages},
                 {"temperature", request.temperature},
                 {"max_tokens", request.max_tokens}};
    if (send_seed && request.seed_hint) body["seed"] = *request.seed_hint;
    return body.dump();
}

Completion LiveBackend::complete(const ChatRequest& request) {
    request.validate();
    const std::string body = wire_body(request, config_.send_seed);
    const std::string path = state_->prefix + "/chat/completions";

    std::string last_error;
    for (int attempt = 0; attempt < std::max(1, config_.retry.max_attempts); ++attempt) {
        if (attempt > 0) {
            const auto exp = config_.retry.base_delay * (1LL << std::min(attempt - 1, 20));
            const auto capped = std::min<std::chrono::milliseconds>(exp, config_.retry.max_delay);
            double u;
            {
                std::lock_guard lock(state_->jitter_mu);
                u = state_->jitter.uniform01();
            }
            sleeper_(std::chrono::milliseconds(static_cast<long long>(static_cast<double>(capped.count()) * (0.5 + 0.5 * u))));
        }
        if (config_.max_requests_per_second > 0.0) {
            std::chrono::steady_clock::time_point slot;
            {
                std::lock_guard lock(state_->rate_mu);
                const auto now = std::chrono::steady_clock::now();
                slot = std::max(now, state_->next_slot);
                state_->next_slot = slot + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                               std::chrono::duration<double>(1.0 / config_.max_requests_per_second));
            }
            std::this_thread::sleep_until(slot);
        }

        httplib::Client client(state_->origin);
        client.set_connection_timeout(config_.timeout);
        client.set_read_timeout(config_.timeout);
        httplib::Headers headers;
        if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
        state_->requests.fetch_add(1);
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300)
            throw Error(Errc::BackendError, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 500));
        try {
            const json reply = json::parse(res->body);
            const auto& message = reply.at("choices").at(0).at("message");
            std::string text = message.at("content").is_null() ? std::string() : message.at("content").get<std::string>();
            std::string meta = reply.value("id", std::string());
            return {std::move(text), meta};
        } catch (const json::exception& e) {
            throw Error(Errc::BackendError, std::string("malformed chat-completions reply: ") + e.what());
        }
    }
    throw Error(Errc::BackendError, "retries exhausted: " + last_error);
}

}  // namespace wmprobe
