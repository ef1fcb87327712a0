// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "wmprobe/extractor.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "wmprobe/error.hpp"

namespace wmprobe::extract {
namespace {

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n\v\f";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    return true;
}

class Cursor {
public:
    explicit Cursor(std::string_view s) : s_(s) {}

    bool done() const { return pos_ >= s_.size(); }
    char peek() const { return done() ? '\0' : s_[pos_]; }
    bool consume(std::string_view token) {
        if (s_.substr(pos_).starts_with(token)) {
            pos_ += token.size();
            return true;
        }
        return false;
    }
    void skip_spaces() {
        while (!done() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
    }

    bool consume_currency() { return consume("$") || consume("\xE2\x82\xAC") || consume("\xC2\xA3"); }

    // sign? currency? digits (,ddd)* (. digits)? ("%" | "km")?
    std::optional<double> number() {
        const std::size_t start = pos_;
        bool negative = false;
        bool currency = consume_currency();
        if (consume("-")) negative = true;
        else consume("+");
        if (!currency) consume_currency();

        std::string digits;
        std::size_t lead = 0;
        while (is_digit(peek())) {
            digits.push_back(s_[pos_++]);
            ++lead;
        }
        if (lead > 0 && peek() == ',') {
            if (lead > 3) return fail(start);
            while (peek() == ',') {
                ++pos_;
                for (int k = 0; k < 3; ++k) {
                    if (!is_digit(peek())) return fail(start);
                    digits.push_back(s_[pos_++]);
                }
            }
            if (is_digit(peek())) return fail(start);
        }
        if (peek() == '.') {
            ++pos_;
            std::size_t frac = 0;
            digits.push_back('.');
            while (is_digit(peek())) {
                digits.push_back(s_[pos_++]);
                ++frac;
            }
            if (frac == 0 && lead == 0) return fail(start);
            if (frac == 0) digits.pop_back();
        }
        if (lead == 0 && digits.empty()) return fail(start);

        double v = 0.0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
        if (ec != std::errc() || ptr != digits.data() + digits.size() || !std::isfinite(v)) return fail(start);
        if (!consume("%")) {
            const std::size_t before_unit = pos_;
            skip_spaces();
            if (!consume("km")) pos_ = before_unit;
        }
        return negative ? -v : v;
    }

private:
    std::optional<double> fail(std::size_t start) {
        pos_ = start;
        return std::nullopt;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string_view to_string(DiscardReason r) noexcept {
    switch (r) {
    case DiscardReason::NoneAnswer: return "none_answer";
    case DiscardReason::Unparseable: return "unparseable";
    case DiscardReason::Empty: return "empty";
    }
    return "unparseable";
}

DiscardReason discard_reason_from_string(std::string_view s) {
    for (auto r : {DiscardReason::NoneAnswer, DiscardReason::Unparseable, DiscardReason::Empty})
        if (to_string(r) == s) return r;
    throw Error(Errc::SchemaError, "unknown discard reason '" + std::string(s) + "'");
}

ChatRequest build_extraction_request(const TaskSpec& task, std::string_view answer_text, const ExtractorConfig& config) {
    static constexpr std::string_view kSlot = "{answer_text}";
    std::string user = task.extraction_instruction;
    const auto pos = user.find(kSlot);
    if (pos == std::string::npos)
        throw Error(Errc::SchemaError, "task '" + task.task_id + "': extraction_instruction lacks {answer_text}");
    user.replace(pos, kSlot.size(), answer_text);

    ChatRequest r;
    r.model_id = config.model_id;
    r.system = std::string(kSystemPrompt);
    r.user = std::move(user);
    r.temperature = config.temperature;
    r.max_tokens = config.max_tokens;
    return r;
}

ExtractionOutcome parse_extractor_output(std::string_view text) {
    std::string_view s = trim(text);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = trim(s.substr(1, s.size() - 2));
    if (s.empty()) return ExtractionOutcome::discard(DiscardReason::Empty);
    if (iequals(s, "none") || iequals(s, "none.")) return ExtractionOutcome::discard(DiscardReason::NoneAnswer);

    Cursor cur(s);
    auto first = cur.number();
    if (!first) return ExtractionOutcome::discard(DiscardReason::Unparseable);
    cur.skip_spaces();
    if (cur.done()) return ExtractionOutcome::of(*first);

    // Range separator: ASCII hyphen or en dash.
    if (!(cur.consume("-") || cur.consume("\xE2\x80\x93"))) return ExtractionOutcome::discard(DiscardReason::Unparseable);
    cur.skip_spaces();
    auto second = cur.number();
    cur.skip_spaces();
    if (!second || !cur.done()) return ExtractionOutcome::discard(DiscardReason::Unparseable);
    const double mid = (*first + *second) / 2.0;
    if (!std::isfinite(mid)) return ExtractionOutcome::discard(DiscardReason::Unparseable);
    return ExtractionOutcome::of(mid);
}

ExtractionOutcome extract(std::string_view answer_text, const TaskSpec& task, ChatBackend& judge,
                          const ExtractorConfig& config) {
    const ChatRequest request = build_extraction_request(task, answer_text, config);
    return parse_extractor_output(judge.complete(request).text);
}

}  // namespace wmprobe::extract
