// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "wmprobe/promptgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <future>
#include <numeric>
#include <set>

#include "wmprobe/error.hpp"

namespace wmprobe::promptgen {
namespace {

std::string trim_copy(std::string_view s) {
    const auto ws = " \t\r\n\v\f";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

struct Candidate {
    LanguageChain chain;
    bool accepted = false;
    BackTranslation translation;
};

}  // namespace

LanguagePool LanguagePool::standard() {
    return {{"Chinese", "Japanese", "Arabic", "Turkish", "Finnish", "Korean", "Polish", "German", "Russian",
             "Indonesian", "Vietnamese", "Hindi", "Swahili", "Spanish", "Hebrew"},
            {"Chinese", "Japanese", "Arabic"}};
}

void LanguagePool::validate() const {
    std::set<std::string> unique(languages.begin(), languages.end());
    if (unique.size() != languages.size()) throw Error(Errc::InvalidArgument, "language pool has duplicates");
    if (unique.size() < 2) throw Error(Errc::InvalidArgument, "language pool needs at least two languages");
    if (anchors.empty()) throw Error(Errc::InvalidArgument, "language pool needs at least one anchor");
    for (const auto& a : anchors)
        if (!unique.contains(a)) throw Error(Errc::InvalidArgument, "anchor '" + a + "' is not in the pool");
}

bool LanguagePool::is_anchor(std::string_view lang) const {
    return std::find(anchors.begin(), anchors.end(), lang) != anchors.end();
}

LanguageChain sample_language_chain(Rng& rng, const LanguagePool& pool) {
    pool.validate();
    const std::size_t n = pool.languages.size();
    for (;;) {
        const std::size_t a = rng.uniform_index(n);
        std::size_t b = rng.uniform_index(n - 1);
        if (b >= a) ++b;
        if (pool.is_anchor(pool.languages[a]) || pool.is_anchor(pool.languages[b]))
            return {pool.languages[a], pool.languages[b]};
    }
}

std::string translator_system_prompt(std::string_view target_lang) {
    static constexpr std::string_view kSlot = "{target_lang}";
    std::string s(kTranslatorSystemTemplate);
    s.replace(s.find(kSlot), kSlot.size(), target_lang);
    return s;
}

BackTranslation back_translate(std::string_view prompt, const LanguageChain& chain, ChatBackend& translator,
                               const GenerationConfig& config, std::int64_t seed_hint) {
    BackTranslation out;
    out.hops = {chain[0], chain[1], "English"};
    std::string text(prompt);
    for (const auto& lang : out.hops) {
        ChatRequest r;
        r.model_id = config.translator_model;
        r.system = translator_system_prompt(lang);
        r.user = text;
        r.temperature = config.translation_temperature;
        r.max_tokens = config.translation_max_tokens;
        r.seed_hint = seed_hint;
        text = trim_copy(translator.complete(r).text);
        if (text.empty()) throw Error(Errc::EmptyTranslation, "translation to " + lang + " returned no text");
    }
    out.text = std::move(text);
    return out;
}

ChatRequest build_judge_request(std::string_view base, std::string_view candidate, const GenerationConfig& config) {
    ChatRequest r;
    r.model_id = config.judge_model;
    r.system = config.judge_instruction;
    r.user = "Request A:\n" + std::string(base) + "\n\nRequest B:\n" + std::string(candidate);
    r.temperature = 0.0;
    r.max_tokens = 5;
    return r;
}

bool parse_verdict(std::string_view text) {
    std::string s = trim_copy(text);
    while (!s.empty() && (s.back() == '.' || s.back() == '!')) s.pop_back();
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    if (s == "YES") return true;
    if (s == "NO") return false;
    throw Error(Errc::UnparseableVerdict, "judge replied '" + std::string(text) + "'");
}

bool verify_intent(std::string_view base, std::string_view candidate, ChatBackend& judge,
                   const GenerationConfig& config) {
    return parse_verdict(judge.complete(build_judge_request(base, candidate, config)).text);
}

std::vector<PromptVariant> generate_paraphrases(const TaskSpec& task, std::size_t n, ChatBackend& translator,
                                                ChatBackend& judge, Rng& rng, const GenerationConfig& config,
                                                const LanguagePool& pool) {
    task.validate();
    pool.validate();
    const std::string base = task.template_text;
    const std::string token = task.placeholder();
    const std::size_t budget = config.max_attempts ? config.max_attempts : 10 * n;
    const std::size_t batch = std::max<std::size_t>(1, config.max_in_flight);

    auto evaluate = [&](const LanguageChain& chain, std::size_t attempt) {
        Candidate c;
        c.chain = chain;
        try {
            c.translation = back_translate(base, chain, translator, config, static_cast<std::int64_t>(attempt));
            // A paraphrase that dropped the placeholder cannot be rendered per intent.
            if (c.translation.text.find(token) == std::string::npos) return c;
            c.accepted = verify_intent(base, c.translation.text, judge, config);
        } catch (const Error& e) {
            if (e.code() != Errc::EmptyTranslation && e.code() != Errc::UnparseableVerdict) throw;
        }
        return c;
    };

    std::vector<PromptVariant> out;
    std::set<std::string> seen;
    std::size_t attempt = 0;
    while (out.size() < n && attempt < budget) {
        const std::size_t count = std::min(batch, budget - attempt);
        std::vector<LanguageChain> chains;
        for (std::size_t k = 0; k < count; ++k) chains.push_back(sample_language_chain(rng, pool));

        std::vector<Candidate> results;
        if (count == 1) {
            results.push_back(evaluate(chains[0], attempt));
        } else {
            std::vector<std::future<Candidate>> futures;
            for (std::size_t k = 0; k < count; ++k)
                futures.push_back(std::async(std::launch::async, evaluate, chains[k], attempt + k));
            for (auto& f : futures) results.push_back(f.get());
        }
        attempt += count;

        for (auto& c : results) {
            if (out.size() == n) break;
            if (!c.accepted || !seen.insert(c.translation.text).second) continue;
            PromptVariant v;
            v.variant_id = make_variant_id(out.size());
            v.text = std::move(c.translation.text);
            v.origin = {OriginKind::TranslationChain, std::move(c.translation.hops)};
            v.verified = true;
            out.push_back(std::move(v));
        }
    }
    if (out.size() < n)
        throw Error(Errc::GenerationBudgetExceeded, "collected " + std::to_string(out.size()) + " of " +
                                                        std::to_string(n) + " paraphrases in " +
                                                        std::to_string(budget) + " attempts");
    return out;
}

std::vector<PromptVariant> generate_survey_prompts(const TaskSpec& task, std::size_t n, ChatBackend& participant,
                                                   const GenerationConfig& config) {
    task.validate();
    if (!task.survey_scenario)
        throw Error(Errc::InvalidArgument, "task '" + task.task_id + "' has no survey scenario");
    const std::string token = task.survey_placeholder.value_or(task.placeholder());
    const std::size_t budget = config.max_attempts ? config.max_attempts : 10 * n;

    std::vector<PromptVariant> out;
    std::set<std::string> seen;
    for (std::size_t attempt = 0; attempt < budget && out.size() < n; ++attempt) {
        ChatRequest r;
        r.model_id = config.translator_model;
        r.system = std::string(kSurveySystemPrompt);
        r.user = *task.survey_scenario;
        r.temperature = config.translation_temperature;
        r.max_tokens = config.translation_max_tokens;
        r.seed_hint = static_cast<std::int64_t>(attempt);
        std::string text = trim_copy(participant.complete(r).text);
        if (text.find(token) == std::string::npos || !seen.insert(text).second) continue;
        PromptVariant v;
        v.variant_id = make_variant_id(out.size());
        v.text = std::move(text);
        v.origin = {OriginKind::Survey, {}};
        v.verified = true;
        out.push_back(std::move(v));
    }
    if (out.size() < n)
        throw Error(Errc::GenerationBudgetExceeded, "collected " + std::to_string(out.size()) + " of " +
                                                        std::to_string(n) + " survey prompts in " +
                                                        std::to_string(budget) + " attempts");
    return out;
}

std::size_t TrigramEmbedder::bucket(std::string_view gram) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : gram) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h % dim_);
}

std::vector<std::vector<double>> TrigramEmbedder::embed(std::span<const std::string> texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        std::vector<double> v(dim_, 0.0);
        if (t.size() < 3) {
            if (!t.empty()) v[bucket(t)] += 1.0;
        } else {
            for (std::size_t i = 0; i + 3 <= t.size(); ++i) v[bucket(std::string_view(t).substr(i, 3))] += 1.0;
        }
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<std::vector<double>> embed(std::span<const std::string> texts, Embedder& embedder) {
    auto vectors = embedder.embed(texts);
    if (vectors.size() != texts.size())
        throw Error(Errc::BackendError, "embedder returned " + std::to_string(vectors.size()) + " vectors for " +
                                            std::to_string(texts.size()) + " texts");
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        double norm = 0.0;
        for (double x : vectors[i]) norm += x * x;
        norm = std::sqrt(norm);
        if (!(norm > 0.0) || !std::isfinite(norm))
            throw Error(Errc::BackendError, "cannot normalise embedding of text #" + std::to_string(i));
        for (double& x : vectors[i]) x /= norm;
    }
    return vectors;
}

void embed_variants(std::vector<PromptVariant>& variants, Embedder& embedder) {
    std::vector<std::string> texts;
    texts.reserve(variants.size());
    for (const auto& v : variants) texts.push_back(v.text);
    auto vectors = embed(texts, embedder);
    for (std::size_t i = 0; i < variants.size(); ++i) variants[i].embedding = std::move(vectors[i]);
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(Errc::InvalidArgument, "embedding dimensions differ");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return 1.0 - std::clamp(dot, -1.0, 1.0);
}

std::vector<PromptVariant> select_diverse(std::span<const PromptVariant> variants, std::size_t k) {
    const std::size_t n = variants.size();
    if (k > n)
        throw Error(Errc::InsufficientCandidates,
                    "asked for " + std::to_string(k) + " variants but only " + std::to_string(n) + " exist");
    for (const auto& v : variants)
        if (!v.embedding) throw Error(Errc::InvalidArgument, "variant '" + v.variant_id + "' has no embedding");
    if (k == 0) return {};

    // Candidate order by id drives every tie-break below.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return variants[a].variant_id < variants[b].variant_id; });
    if (n == 1) return {variants[order[0]]};

    std::vector<double> dist(n * n, 0.0);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            dist[a * n + b] = dist[b * n + a] = cosine_distance(*variants[a].embedding, *variants[b].embedding);

    std::size_t best_a = order[0], best_b = order[1];
    double best = -1.0;
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = x + 1; y < n; ++y) {
            const double d = dist[order[x] * n + order[y]];
            if (d > best) {
                best = d;
                best_a = order[x];
                best_b = order[y];
            }
        }

    std::vector<std::size_t> chosen{best_a};
    if (k >= 2) chosen.push_back(best_b);
    std::vector<bool> taken(n, false);
    for (auto c : chosen) taken[c] = true;
    std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
    for (std::size_t c = 0; c < n; ++c)
        for (auto s : chosen) min_dist[c] = std::min(min_dist[c], dist[c * n + s]);

    while (chosen.size() < k) {
        std::size_t pick = n;
        double pick_d = -1.0;
        for (auto c : order) {
            if (taken[c]) continue;
            if (min_dist[c] > pick_d) {
                pick_d = min_dist[c];
                pick = c;
            }
        }
        chosen.push_back(pick);
        taken[pick] = true;
        for (std::size_t c = 0; c < n; ++c) min_dist[c] = std::min(min_dist[c], dist[c * n + pick]);
    }

    std::vector<PromptVariant> out;
    out.reserve(chosen.size());
    for (auto c : chosen) out.push_back(variants[c]);
    return out;
}

}  // namespace wmprobe::promptgen
