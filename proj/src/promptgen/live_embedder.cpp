// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <thread>


#include <httplib.h>
#include <json.hpp>

#include "wmprobe/error.hpp"
#include "wmprobe/promptgen.hpp"

namespace wmprobe::promptgen {

using nlohmann::json;

std::vector<std::vector<double>> LiveEmbedder::embed(std::span<const std::string> texts) {
    auto [origin, prefix] = split_base_url(config_.base_url);
    json body = {{"model", model_}, {"input", json(std::vector<std::string>(texts.begin(), texts.end()))}};
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    std::string last_error;
    for (int attempt = 0; attempt < std::max(1, config_.retry.max_attempts); ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::min<std::chrono::milliseconds>(
                config_.retry.base_delay * (1LL << std::min(attempt - 1, 20)), config_.retry.max_delay));
        httplib::Client client(origin);
        client.set_read_timeout(config_.timeout);
        auto res = client.Post(prefix + "/embeddings", headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300)
            throw Error(Errc::BackendError, "embeddings HTTP " + std::to_string(res->status));
        try {
            const json reply = json::parse(res->body);
            std::vector<std::vector<double>> out(texts.size());
            for (const auto& item : reply.at("data")) {
                const auto index = item.at("index").get<std::size_t>();
                if (index >= out.size()) throw Error(Errc::BackendError, "embedding index out of range");
                out[index] = item.at("embedding").get<std::vector<double>>();
            }
            return out;
        } catch (const json::exception& e) {
            throw Error(Errc::BackendError, std::string("malformed embeddings reply: ") + e.what());
        }
    }
    throw Error(Errc::BackendError, "embeddings retries exhausted: " + last_error);
}

}  // namespace wmprobe::promptgen
