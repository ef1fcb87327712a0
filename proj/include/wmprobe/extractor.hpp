// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "wmprobe/chat_backend.hpp"
#include "wmprobe/task_spec.hpp"

namespace wmprobe::extract {

/// System text shared by every extraction request.
inline constexpr std::string_view kSystemPrompt =
    "You are an assistant designed to extract the final numerical answer from a given text. Return only the number, "
    "with no additional words. If the answer is a range, return it in the format a-b (e.g., 10-15), using a single "
    "hyphen with no spaces.";

enum class DiscardReason { NoneAnswer, Unparseable, Empty };

std::string_view to_string(DiscardReason r) noexcept;
DiscardReason discard_reason_from_string(std::string_view s);

/// Either a finite value in task units or the reason the answer was dropped.
class ExtractionOutcome {
public:
    static ExtractionOutcome of(double value) { return ExtractionOutcome(value, DiscardReason::Empty); }
    static ExtractionOutcome discard(DiscardReason reason) { return ExtractionOutcome(std::nullopt, reason); }

    bool discarded() const noexcept { return !value_.has_value(); }
    double value() const { return value_.value(); }
    const std::optional<double>& maybe_value() const noexcept { return value_; }
    DiscardReason reason() const noexcept { return reason_; }

    friend bool operator==(const ExtractionOutcome& a, const ExtractionOutcome& b) {
        return a.value_ == b.value_ && (a.value_ || a.reason_ == b.reason_);
    }

private:
    ExtractionOutcome(std::optional<double> v, DiscardReason r) : value_(v), reason_(r) {}
    std::optional<double> value_;
    DiscardReason reason_;
};

struct ExtractorConfig {
    std::string model_id = "openai/gpt-4o-mini";
    double temperature = 0.0;
    int max_tokens = 32;
};

ChatRequest build_extraction_request(const TaskSpec& task, std::string_view answer_text, const ExtractorConfig& config = {});

/// Total parser for the post-processor's reply.
///
/// Accepts a single number or an "a-b" range (midpoint), with optional
/// leading currency symbol, comma thousands separators, trailing "%" or
/// "km". A leading "-" is a sign. "None" in any case maps to NoneAnswer,
/// blank text to Empty, and anything else to Unparseable.
ExtractionOutcome parse_extractor_output(std::string_view text);

ExtractionOutcome extract(std::string_view answer_text, const TaskSpec& task, ChatBackend& judge,
                          const ExtractorConfig& config = {});

/// Binds a task and a judge backend so the collector can call it per answer.
class Extractor {
public:
    Extractor(TaskSpec task, ChatBackend& judge, ExtractorConfig config = {})
        : task_(std::move(task)), judge_(judge), config_(std::move(config)) {}

    ExtractionOutcome operator()(std::string_view answer_text) const {
        return extract(answer_text, task_, judge_, config_);
    }

    const TaskSpec& task() const noexcept { return task_; }

private:
    TaskSpec task_;
    ChatBackend& judge_;
    ExtractorConfig config_;
};

}  // namespace wmprobe::extract
