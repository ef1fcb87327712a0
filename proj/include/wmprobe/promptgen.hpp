// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wmprobe/chat_backend.hpp"
#include "wmprobe/rng.hpp"
#include "wmprobe/task_spec.hpp"

namespace wmprobe::promptgen {

/// Intermediate languages for translation chains. Every chain must visit at
/// least one anchor.
struct LanguagePool {
    std::vector<std::string> languages;
    std::vector<std::string> anchors;

    /// Fifteen languages with anchors {Chinese, Japanese, Arabic}.
    static LanguagePool standard();

    /// Throws Error(InvalidArgument) unless anchors is a non-empty subset of
    /// languages and at least two distinct languages exist.
    void validate() const;

    bool is_anchor(std::string_view lang) const;
};

using LanguageChain = std::array<std::string, 2>;

/// Uniform over ordered pairs of distinct languages that contain an anchor.
LanguageChain sample_language_chain(Rng& rng, const LanguagePool& pool);

inline constexpr std::string_view kTranslatorSystemTemplate =
    "You are a professional translator. Translate the user text to {target_lang}. Return *only* the "
    "translation\xE2\x80\x94no commentary.";

inline constexpr std::string_view kJudgeInstruction =
    "Do these two requests ask for the same thing? Answer YES or NO.";

inline constexpr std::string_view kSurveySystemPrompt =
    "You are simulating a survey participant who needs to write a question to an AI assistant about transportation "
    "and travel.";

struct GenerationConfig {
    std::string translator_model = "openai/gpt-4o-mini";
    std::string judge_model = "openai/gpt-4o-mini";
    double translation_temperature = 1.0;
    int translation_max_tokens = 600;
    std::string judge_instruction = std::string(kJudgeInstruction);
    std::size_t max_attempts = 0;  // 0 means 10 * n
    std::size_t max_in_flight = 1;
};

std::string translator_system_prompt(std::string_view target_lang);

struct BackTranslation {
    std::string text;
    std::vector<std::string> hops;  // [lang1, lang2, "English"]
};

/// Three sequential translation calls: source -> lang1 -> lang2 -> English.
/// Throws EmptyTranslation when a hop returns blank text.
BackTranslation back_translate(std::string_view prompt, const LanguageChain& chain, ChatBackend& translator,
                               const GenerationConfig& config = {}, std::int64_t seed_hint = 0);

/// The judge's user message for comparing `base` and `candidate`.
ChatRequest build_judge_request(std::string_view base, std::string_view candidate, const GenerationConfig& config = {});

/// YES -> true, NO -> false (case-insensitive, trailing punctuation ignored);
/// anything else throws UnparseableVerdict.
bool parse_verdict(std::string_view text);

bool verify_intent(std::string_view base, std::string_view candidate, ChatBackend& judge,
                   const GenerationConfig& config = {});

/// Collects `n` distinct, judge-approved back-translations of the task
/// template. Candidates are numbered in submission order, so results do not
/// depend on `max_in_flight`. Throws GenerationBudgetExceeded.
std::vector<PromptVariant> generate_paraphrases(const TaskSpec& task, std::size_t n, ChatBackend& translator,
                                                ChatBackend& judge, Rng& rng, const GenerationConfig& config = {},
                                                const LanguagePool& pool = LanguagePool::standard());

/// Survey-mode variants: completions of the task's survey scenario that keep
/// the placeholder token. Throws GenerationBudgetExceeded, or InvalidArgument
/// when the task has no survey scenario.
std::vector<PromptVariant> generate_survey_prompts(const TaskSpec& task, std::size_t n, ChatBackend& participant,
                                                   const GenerationConfig& config = {});

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
};

/// Offline embedder: hashed character-trigram counts projected to `dim`
/// buckets, then L2-normalised. Texts shorter than three bytes count as a
/// single gram.
class TrigramEmbedder final : public Embedder {
public:
    explicit TrigramEmbedder(std::size_t dim = 256) : dim_(dim) {}
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;
    std::size_t bucket(std::string_view gram) const;
    std::size_t dim() const noexcept { return dim_; }

private:
    std::size_t dim_;
};

/// OpenAI-compatible /embeddings client.
class LiveEmbedder final : public Embedder {
public:
    LiveEmbedder(LiveConfig config, std::string model) : config_(std::move(config)), model_(std::move(model)) {}
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

private:
    LiveConfig config_;
    std::string model_;
};

/// Embeds and L2-normalises; throws BackendError on zero vectors or a count
/// mismatch.
std::vector<std::vector<double>> embed(std::span<const std::string> texts, Embedder& embedder);

/// Attaches embeddings to each variant in place.
void embed_variants(std::vector<PromptVariant>& variants, Embedder& embedder);

double cosine_distance(std::span<const double> a, std::span<const double> b);

/// Greedy farthest-point selection under cosine distance: start from the
/// most distant pair, then repeatedly add the variant whose minimum distance
/// to the chosen set is largest. Ties go to the lowest variant_id. Output is
/// in selection order. Throws InsufficientCandidates when k exceeds the input.
std::vector<PromptVariant> select_diverse(std::span<const PromptVariant> variants, std::size_t k);

}  // namespace wmprobe::promptgen
